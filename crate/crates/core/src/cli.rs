//! `moral-mech` command line. Every subcommand yields a JSON document plus
//! a row view used for `--format csv` and `--format table`.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::catalog::{self, Params, ENTRIES};
use crate::correlated::{
    gap_search, lookahead, moralize_gain, two_approx_check, validate_h_properties, GapConfig, Verdict,
};
use crate::distributions::{default_e, product_joint, DiscreteDistribution, JointDistribution};
use crate::error::{Error, Result};
use crate::io::{self, fmt_profile, GridFile, MoralityReportFile};
use crate::mechanism::{check_alpha_moral, expected_revenue, is_truthful, ProfitMaximizer};
use crate::myerson::{lift, myerson_grid};
use crate::rational::Rational;
use crate::reproduce::{self, HInstance, ReproOptions};
use crate::search::{
    brute_force_optimal, optimal_alpha_sweep, Mode, SearchOptions, SearchResult, SearchSpace, DEFAULT_CAP,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Parser)]
#[command(name = "moral-mech", version, about = "Exact auction workbench for alpha-moral bidders")]
pub struct Cli {
    /// Worker threads for parallel searches (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output format; most commands default to json, reproduce-paper to table.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write the output here (atomically) instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

/// Where the values come from. Distributions are files or `uniform:K` /
/// `exponential:K`; a single one with `--players` is repeated.
#[derive(Debug, Args, Clone, Default)]
pub struct Population {
    #[arg(long = "dist")]
    pub dists: Vec<String>,
    #[arg(long)]
    pub players: Option<usize>,
    #[arg(long)]
    pub joint: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the named mechanisms or build one as a grid file.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
    /// Check alpha-morality of a grid; exits 1 when violated.
    CheckMoral {
        #[arg(long)]
        grid: PathBuf,
        /// Defaults to the grid's own alpha.
        #[arg(long)]
        alpha: Option<Rational>,
    },
    /// Expected revenue of a grid.
    Revenue {
        #[arg(long)]
        grid: PathBuf,
        #[command(flatten)]
        population: Population,
    },
    /// Revenue-maximizing grid over the candidate price space.
    Search {
        #[arg(long, value_enum)]
        mode: SearchMode,
        #[arg(long, default_value = "1")]
        alpha: Rational,
        #[command(flatten)]
        population: Population,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: u128,
        /// Restrict to player-symmetric grids (a lower bound).
        #[arg(long)]
        symmetric: bool,
        /// Use `k` candidate prices per value step instead of the default list.
        #[arg(long)]
        refine: Option<u32>,
        /// Return any optimal grid instead of the lexicographically smallest.
        #[arg(long)]
        any_optimum: bool,
    },
    /// Optimal moral revenue for each alpha.
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "0,1/4,1/2,3/4,1")]
        alphas: Vec<Rational>,
        #[command(flatten)]
        population: Population,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: u128,
    },
    /// Closed-form optimal truthful grid for independent regular values.
    Myerson {
        #[command(flatten)]
        population: Population,
    },
    /// Lift a 1-moral grid to a truthful one without losing revenue.
    Lift {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        dist: String,
        /// Include every step.
        #[arg(long)]
        trace: bool,
    },
    /// Lookahead auction for a correlated joint.
    Lookahead {
        #[arg(long)]
        joint: PathBuf,
        /// Also compare with the optimal moral revenue at this alpha.
        #[arg(long)]
        compare_alpha: Option<Rational>,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: u128,
    },
    /// Seeded search for joints where moral revenue beats truthful revenue.
    GapSearch {
        #[arg(long, default_value_t = 3)]
        support: usize,
        #[arg(long, default_value_t = 12)]
        denom_cap: u32,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check the two-player instance properties; exits 1 unless all hold.
    ValidateH {
        #[arg(long)]
        joint: PathBuf,
        #[arg(long)]
        alpha: Rational,
        #[arg(long)]
        eps: Rational,
        #[arg(long)]
        delta: Rational,
        /// Also run the moralize transform and compare its gain.
        #[arg(long)]
        gain: bool,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: u128,
    },
    /// Run the acceptance suite and print a pass/fail table.
    ReproducePaper {
        #[arg(long)]
        quick: bool,
        /// Only these criteria (1-10).
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
        /// Two-player instance for the moralize-gain check.
        #[arg(long, requires_all = ["alpha", "eps", "delta"])]
        h_joint: Option<PathBuf>,
        #[arg(long)]
        alpha: Option<Rational>,
        #[arg(long)]
        eps: Option<Rational>,
        #[arg(long)]
        delta: Option<Rational>,
    },
    /// Run a command described by a JSON experiment file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum CatalogAction {
    List,
    Build {
        name: String,
        #[arg(long)]
        alpha: Option<Rational>,
        #[arg(long)]
        c: Option<Rational>,
        #[arg(long)]
        reserve: Option<Rational>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        players: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    Truthful,
    Moral,
}

/// JSON form of a command line, for `moral-mech run --config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: String,
    pub name: Option<String>,
    pub grid: Option<PathBuf>,
    pub joint: Option<PathBuf>,
    #[serde(default)]
    pub dist: Vec<String>,
    pub players: Option<usize>,
    pub mode: Option<SearchMode>,
    pub alpha: Option<Rational>,
    #[serde(default)]
    pub alphas: Vec<Rational>,
    pub c: Option<Rational>,
    pub reserve: Option<Rational>,
    pub points: Option<usize>,
    pub eps: Option<Rational>,
    pub delta: Option<Rational>,
    pub cap: Option<u128>,
    #[serde(default)]
    pub symmetric: bool,
    pub refine: Option<u32>,
    #[serde(default)]
    pub any_optimum: bool,
    #[serde(default)]
    pub trace: bool,
    #[serde(default)]
    pub gain: bool,
    #[serde(default)]
    pub quick: bool,
    #[serde(default)]
    pub only: Vec<u8>,
    pub h_joint: Option<PathBuf>,
    pub support: Option<usize>,
    pub denom_cap: Option<u32>,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// The equivalent argument vector (without the program name).
    pub fn to_args(&self) -> Result<Vec<OsString>> {
        if self.command == "run" {
            return Err(Error::InvalidArgument("a config cannot run another config".into()));
        }
        let mut a: Vec<OsString> = self.command.split_whitespace().map(OsString::from).collect();
        if let Some(n) = &self.name {
            a.push(n.into());
        }
        let mut opt = |flag: &str, v: Option<String>| {
            if let Some(v) = v {
                a.push(format!("--{flag}").into());
                a.push(v.into());
            }
        };
        let s = |x: &Option<Rational>| x.as_ref().map(ToString::to_string);
        let p = |x: &Option<PathBuf>| x.as_ref().map(|p| p.display().to_string());
        opt("grid", p(&self.grid));
        opt("joint", p(&self.joint));
        opt("h-joint", p(&self.h_joint));
        opt("players", self.players.map(|x| x.to_string()));
        opt(
            "mode",
            self.mode.map(|m| match m {
                SearchMode::Truthful => "truthful".into(),
                SearchMode::Moral => "moral".into(),
            }),
        );
        opt("alpha", s(&self.alpha));
        opt("c", s(&self.c));
        opt("reserve", s(&self.reserve));
        opt("points", self.points.map(|x| x.to_string()));
        opt("eps", s(&self.eps));
        opt("delta", s(&self.delta));
        opt("cap", self.cap.map(|x| x.to_string()));
        opt("refine", self.refine.map(|x| x.to_string()));
        opt("support", self.support.map(|x| x.to_string()));
        opt("denom-cap", self.denom_cap.map(|x| x.to_string()));
        opt("samples", self.samples.map(|x| x.to_string()));
        opt("seed", self.seed.map(|x| x.to_string()));
        opt("threads", self.threads.map(|x| x.to_string()));
        opt(
            "format",
            self.format.map(|f| format!("{f:?}").to_lowercase()),
        );
        opt("out", p(&self.out));
        if !self.alphas.is_empty() {
            let xs: Vec<String> = self.alphas.iter().map(ToString::to_string).collect();
            opt("alphas", Some(xs.join(",")));
        }
        if !self.only.is_empty() {
            let xs: Vec<String> = self.only.iter().map(ToString::to_string).collect();
            opt("only", Some(xs.join(",")));
        }
        for d in &self.dist {
            opt("dist", Some(d.clone()));
        }
        for (on, flag) in [
            (self.symmetric, "--symmetric"),
            (self.any_optimum, "--any-optimum"),
            (self.trace, "--trace"),
            (self.gain, "--gain"),
            (self.quick, "--quick"),
        ] {
            if on {
                a.push(flag.into());
            }
        }
        Ok(a)
    }
}

/// What a command produced: the JSON document, a row view and whether the
/// checked property held.
pub struct Emission {
    pub json: Value,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub ok: bool,
    pub default_format: Format,
}

impl Emission {
    fn new(json: Value, header: Vec<&'static str>, rows: Vec<Vec<String>>) -> Self {
        Emission {
            json,
            header,
            rows,
            ok: true,
            default_format: Format::Json,
        }
    }

    fn render(&self, f: Format) -> String {
        match f {
            Format::Json => io::to_json_pretty(&self.json),
            Format::Csv => io::rows_csv(&self.header, &self.rows),
            Format::Table => io::rows_table(&self.header, &self.rows),
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            let doc = json!({ "error": e.reason(), "message": e.to_string() });
            eprintln!("{doc}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<i32> {
    if let Command::Run { config } = &cli.command {
        let cfg: ExperimentConfig = io::read_json(config)?;
        let mut args: Vec<OsString> = vec!["moral-mech".into()];
        args.extend(cfg.to_args()?);
        let inner = Cli::try_parse_from(args).map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
        if matches!(inner.command, Command::Run { .. }) {
            return Err(Error::InvalidArgument("a config cannot run another config".into()));
        }
        return execute(Cli {
            threads: inner.threads.or(cli.threads),
            format: inner.format.or(cli.format),
            out: inner.out.or(cli.out),
            command: inner.command,
        });
    }
    let emission = crate::search::with_threads(cli.threads, || dispatch(&cli.command, cli.threads))??;
    let text = emission.render(cli.format.unwrap_or(emission.default_format));
    match &cli.out {
        Some(p) => io::write_atomic(p, text.as_bytes())?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| Error::Io {
                    path: "<stdout>".into(),
                    source,
                })?;
        }
    }
    Ok(if emission.ok { 0 } else { 1 })
}

fn load_dist(spec: &str) -> Result<DiscreteDistribution> {
    let builtin = |prefix: &str| -> Option<Result<usize>> {
        spec.strip_prefix(prefix).map(|k| {
            k.parse::<usize>()
                .map_err(|_| Error::InvalidArgument(format!("bad point count in {spec}")))
        })
    };
    if let Some(k) = builtin("uniform:") {
        return DiscreteDistribution::uniform(k?);
    }
    if let Some(k) = builtin("exponential:") {
        return DiscreteDistribution::exponential(k?, &default_e());
    }
    io::read_json(Path::new(spec))
}

struct Loaded {
    dists: Option<Vec<DiscreteDistribution>>,
    joint: JointDistribution,
}

fn load_population(p: &Population) -> Result<Loaded> {
    match (&p.joint, p.dists.is_empty()) {
        (Some(_), false) => Err(Error::InvalidArgument("give either --joint or --dist, not both".into())),
        (Some(path), true) => {
            if p.players.is_some() {
                return Err(Error::InvalidArgument("--players does not apply to --joint".into()));
            }
            Ok(Loaded {
                dists: None,
                joint: io::read_json(path)?,
            })
        }
        (None, true) => Err(Error::InvalidArgument("missing --joint or --dist".into())),
        (None, false) => {
            let mut ds = p.dists.iter().map(|s| load_dist(s)).collect::<Result<Vec<_>>>()?;
            if let Some(n) = p.players {
                if ds.len() != 1 {
                    return Err(Error::InvalidArgument("--players repeats a single --dist".into()));
                }
                if n == 0 {
                    return Err(Error::InvalidArgument("--players must be positive".into()));
                }
                ds = vec![ds[0].clone(); n];
            }
            Ok(Loaded {
                joint: product_joint(&ds)?,
                dists: Some(ds),
            })
        }
    }
}

fn grid_rows(m: &ProfitMaximizer) -> Vec<Vec<String>> {
    let g = &m.grid;
    let mut rows = vec![];
    for i in 0..g.n() {
        for t in 0..g.tuple_count(i) {
            rows.push(vec![
                (i + 1).to_string(),
                fmt_profile(&g.opponent_values(i, t)),
                g.price(i, t).to_string(),
            ]);
        }
    }
    rows
}

const GRID_HEADER: [&str; 3] = ["player", "opponents", "price"];

fn grid_json(m: &ProfitMaximizer) -> Value {
    serde_json::to_value(GridFile::from_mechanism(m)).expect("serializable")
}

fn search_opts(cap: u128, threads: Option<usize>) -> SearchOptions {
    SearchOptions {
        cap,
        threads,
        ..SearchOptions::default()
    }
}

fn search_json(r: &SearchResult) -> Value {
    let m = ProfitMaximizer::new(r.best_grid.clone(), r.alpha.clone());
    json!({ "result": r, "grid": grid_json(&m) })
}

fn verdict_text(v: &Verdict) -> String {
    match v {
        Verdict::Holds => "holds".into(),
        Verdict::Fails(d) => format!("fails: {d}"),
        Verdict::Unverifiable(d) => format!("unverifiable: {d}"),
    }
}

fn dispatch(cmd: &Command, threads: Option<usize>) -> Result<Emission> {
    match cmd {
        Command::Catalog { action } => catalog_cmd(action),
        Command::CheckMoral { grid, alpha } => {
            let m = io::read_mechanism(grid)?;
            let alpha = alpha.clone().unwrap_or_else(|| m.alpha.clone());
            let report = check_alpha_moral(&m, &alpha);
            let file = MoralityReportFile::from(&report);
            let rows = file
                .violations
                .iter()
                .map(|v| {
                    vec![
                        fmt_profile(&v.instance),
                        v.deviator.to_string(),
                        v.lie.to_string(),
                        v.gain.to_string(),
                        v.loss.to_string(),
                    ]
                })
                .collect();
            let mut e = Emission::new(
                serde_json::to_value(&file).expect("serializable"),
                vec!["instance", "deviator", "lie", "gain", "loss"],
                rows,
            );
            e.ok = report.moral;
            Ok(e)
        }
        Command::Revenue { grid, population } => {
            let m = io::read_mechanism(grid)?;
            let pop = load_population(population)?;
            let revenue = expected_revenue(&m, &pop.joint)?;
            let truthful = is_truthful(&m).holds();
            Ok(Emission::new(
                json!({ "revenue": revenue, "truthful": truthful }),
                vec!["revenue", "truthful"],
                vec![vec![revenue.to_string(), truthful.to_string()]],
            ))
        }
        Command::Search {
            mode,
            alpha,
            population,
            cap,
            symmetric,
            refine,
            any_optimum,
        } => {
            let pop = load_population(population)?;
            let mode = match mode {
                SearchMode::Truthful => Mode::Truthful,
                SearchMode::Moral => Mode::Moral,
            };
            let alpha = if mode == Mode::Truthful { Rational::zero() } else { alpha.clone() };
            let mut space = SearchSpace::new(pop.joint.supports(), mode, alpha)?;
            if let Some(k) = refine {
                space = space.refined(*k)?;
            }
            let opts = SearchOptions {
                symmetry: *symmetric,
                lex_smallest: !*any_optimum,
                ..search_opts(*cap, threads)
            };
            let r = brute_force_optimal(&space, &pop.joint, &opts)?;
            let m = ProfitMaximizer::new(r.best_grid.clone(), r.alpha.clone());
            let mut rows = grid_rows(&m);
            rows.push(vec!["revenue".into(), String::new(), r.best_revenue.to_string()]);
            Ok(Emission::new(search_json(&r), GRID_HEADER.to_vec(), rows))
        }
        Command::Sweep { alphas, population, cap } => {
            let pop = load_population(population)?;
            let rows = optimal_alpha_sweep(&pop.joint.supports(), &pop.joint, alphas, &search_opts(*cap, threads))?;
            let json_rows: Vec<Value> = rows
                .iter()
                .map(|r| json!({ "alpha": r.alpha, "revenue": r.result.best_revenue, "optima_count": r.result.optima_count.to_string(), "truthful": r.result.is_truthful_flag }))
                .collect();
            let table = rows
                .iter()
                .map(|r| {
                    vec![
                        r.alpha.to_string(),
                        r.result.best_revenue.to_string(),
                        r.result.optima_count.to_string(),
                        r.result.is_truthful_flag.to_string(),
                    ]
                })
                .collect();
            Ok(Emission::new(
                Value::Array(json_rows),
                vec!["alpha", "revenue", "optima", "truthful"],
                table,
            ))
        }
        Command::Myerson { population } => {
            let pop = load_population(population)?;
            let ds = pop
                .dists
                .ok_or_else(|| Error::InvalidArgument("myerson needs independent --dist marginals".into()))?;
            let mg = myerson_grid(&ds)?;
            let revenue = expected_revenue(&mg.mechanism, &pop.joint)?;
            let mut doc = serde_json::to_value(&mg).expect("serializable");
            doc["revenue"] = json!(revenue);
            doc["grid"] = grid_json(&mg.mechanism);
            let mut rows = grid_rows(&mg.mechanism);
            rows.push(vec!["revenue".into(), String::new(), revenue.to_string()]);
            Ok(Emission::new(doc, GRID_HEADER.to_vec(), rows))
        }
        Command::Lift { grid, dist, trace } => {
            let m = io::read_mechanism(grid)?;
            let d = load_dist(dist)?;
            let (out, tr) = lift(&m, &d)?;
            let mut doc = json!({
                "initial_revenue": tr.initial_revenue,
                "final_revenue": tr.final_revenue,
                "steps": tr.steps.len(),
                "grid": grid_json(&out),
            });
            if *trace {
                doc["trace"] = serde_json::to_value(&tr).expect("serializable");
                let rows = tr
                    .steps
                    .iter()
                    .map(|s| {
                        let rule = serde_json::to_value(s.rule).expect("serializable");
                        vec![
                            rule.as_str().unwrap_or_default().to_string(),
                            s.player.to_string(),
                            fmt_profile(&s.opponents),
                            s.changes.len().to_string(),
                            s.revenue_before.to_string(),
                            s.revenue_after.to_string(),
                        ]
                    })
                    .collect();
                return Ok(Emission::new(
                    doc,
                    vec!["rule", "player", "opponents", "changes", "revenue_before", "revenue_after"],
                    rows,
                ));
            }
            let mut rows = grid_rows(&out);
            rows.push(vec!["revenue".into(), String::new(), tr.final_revenue.to_string()]);
            Ok(Emission::new(doc, GRID_HEADER.to_vec(), rows))
        }
        Command::Lookahead { joint, compare_alpha, cap } => {
            let j: JointDistribution = io::read_json(joint)?;
            let la = lookahead(&j)?;
            let mut doc = json!({ "revenue": la.revenue, "grid": grid_json(&la.mechanism) });
            let mut rows = grid_rows(&la.mechanism);
            rows.push(vec!["revenue".into(), String::new(), la.revenue.to_string()]);
            let mut ok = true;
            if let Some(a) = compare_alpha {
                let t = two_approx_check(&j, a, &search_opts(*cap, threads))?;
                rows.push(vec!["ratio".into(), String::new(), t.ratio.to_string()]);
                ok = t.passes;
                doc["two_approx"] = serde_json::to_value(&t).expect("serializable");
            }
            let mut e = Emission::new(doc, GRID_HEADER.to_vec(), rows);
            e.ok = ok;
            Ok(e)
        }
        Command::GapSearch {
            support,
            denom_cap,
            samples,
            seed,
        } => {
            let config = GapConfig {
                support: *support,
                denom_cap: *denom_cap,
                samples: *samples,
                seed: *seed,
            };
            let r = gap_search(&config, &search_opts(DEFAULT_CAP, threads))?;
            let mut doc = serde_json::to_value(&r).expect("serializable");
            doc["best"]["moral_grid"] = search_json(&r.best.moral)["grid"].clone();
            doc["best"]["truthful_grid"] = search_json(&r.best.truthful)["grid"].clone();
            Ok(Emission::new(
                doc,
                vec!["best_sample", "gap", "moral", "truthful", "samples_with_gap"],
                vec![vec![
                    r.best.sample.to_string(),
                    r.best.gap.to_string(),
                    r.best.moral_revenue.to_string(),
                    r.best.truthful_revenue.to_string(),
                    r.samples_with_gap.to_string(),
                ]],
            ))
        }
        Command::ValidateH {
            joint,
            alpha,
            eps,
            delta,
            gain,
            cap,
        } => {
            let j: JointDistribution = io::read_json(joint)?;
            let opts = search_opts(*cap, threads);
            let report = validate_h_properties(&j, alpha, eps, delta, &opts)?;
            let mut ok = report.all_hold();
            let mut doc = serde_json::to_value(&report).expect("serializable");
            let mut rows: Vec<Vec<String>> = [
                ("finite_support", &report.finite_support),
                ("values_at_least_one", &report.values_at_least_one),
                ("player1_separation", &report.player1_separation),
                ("player2_band", &report.player2_band),
                ("truthful_revenue_bound", &report.truthful_revenue_bound),
                ("player2_never_optimal", &report.player2_never_optimal),
            ]
            .iter()
            .map(|(k, v)| vec![k.to_string(), verdict_text(v)])
            .collect();
            if *gain {
                let g = moralize_gain(&j, alpha, eps, delta, &opts)?;
                ok &= g.verdict.holds();
                rows.push(vec!["moralize_gain".into(), verdict_text(&g.verdict)]);
                doc["moralize_gain"] = serde_json::to_value(&g).expect("serializable");
            }
            let mut e = Emission::new(doc, vec!["property", "verdict"], rows);
            e.ok = ok;
            Ok(e)
        }
        Command::ReproducePaper {
            quick,
            only,
            h_joint,
            alpha,
            eps,
            delta,
        } => {
            let h_instance = match h_joint {
                None => None,
                Some(p) => Some(HInstance {
                    joint: io::read_json(p)?,
                    alpha: alpha.clone().expect("required by clap"),
                    eps: eps.clone().expect("required by clap"),
                    delta: delta.clone().expect("required by clap"),
                }),
            };
            let opts = ReproOptions {
                quick: *quick,
                threads,
                h_instance,
            };
            let ids: Vec<u8> = if only.is_empty() { (1..=10).collect() } else { only.clone() };
            if let Some(bad) = ids.iter().find(|&&k| !(1..=10).contains(&k)) {
                return Err(Error::InvalidArgument(format!("no criterion {bad}")));
            }
            let outcomes = reproduce::run_criteria(&ids, &opts, |c| {
                eprintln!(
                    "criterion {}: {} in {:.1}s",
                    c.id,
                    if c.pass { "pass" } else { "FAIL" },
                    c.seconds
                );
            });
            let rows = outcomes
                .iter()
                .map(|c| {
                    vec![
                        c.id.to_string(),
                        if c.pass { "PASS" } else { "FAIL" }.to_string(),
                        c.title.to_string(),
                        c.detail.clone(),
                    ]
                })
                .collect();
            let doc: Vec<Value> = outcomes
                .iter()
                .map(|c| json!({ "id": c.id, "title": c.title, "pass": c.pass, "detail": c.detail }))
                .collect();
            let mut e = Emission::new(Value::Array(doc), vec!["#", "result", "criterion", "detail"], rows);
            e.ok = outcomes.iter().all(|c| c.pass);
            e.default_format = Format::Table;
            Ok(e)
        }
        Command::Run { .. } => Err(Error::InvalidArgument("nested run".into())),
    }
}

fn catalog_cmd(action: &CatalogAction) -> Result<Emission> {
    match action {
        CatalogAction::List => {
            let rows = ENTRIES
                .iter()
                .map(|e| vec![e.name.to_string(), e.params.join(","), e.about.to_string()])
                .collect();
            Ok(Emission::new(
                serde_json::to_value(ENTRIES).expect("serializable"),
                vec!["name", "params", "about"],
                rows,
            ))
        }
        CatalogAction::Build {
            name,
            alpha,
            c,
            reserve,
            points,
            players,
        } => {
            let m = catalog::build(
                name,
                &Params {
                    alpha: alpha.clone(),
                    c: c.clone(),
                    reserve: reserve.clone(),
                    points: *points,
                    players: *players,
                },
            )?;
            Ok(Emission::new(grid_json(&m), GRID_HEADER.to_vec(), grid_rows(&m)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_becomes_arguments() {
        let cfg: ExperimentConfig = io::parse_json(
            r#"{"command": "search", "mode": "moral", "alpha": "1/2", "dist": ["uniform:3"], "players": 2, "symmetric": true}"#,
            "cfg",
        )
        .unwrap();
        let mut args = vec![OsString::from("moral-mech")];
        args.extend(cfg.to_args().unwrap());
        let cli = Cli::try_parse_from(args).unwrap();
        match cli.command {
            Command::Search { mode, alpha, symmetric, population, .. } => {
                assert_eq!(mode, SearchMode::Moral);
                assert_eq!(alpha, Rational::new(1, 2));
                assert!(symmetric);
                assert_eq!(population.players, Some(2));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_rejects_unknown_fields_and_bad_rationals() {
        let unknown = io::parse_json::<ExperimentConfig>(r#"{"command": "search", "colour": 1}"#, "cfg");
        assert!(matches!(unknown, Err(Error::Parse { .. })));
        match io::parse_json::<ExperimentConfig>(r#"{"command": "search", "alpha": "1/0"}"#, "cfg") {
            Err(Error::Parse { path, .. }) => assert_eq!(path, "cfg at alpha"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn builtin_distributions() {
        assert_eq!(load_dist("uniform:3").unwrap(), DiscreteDistribution::uniform(3).unwrap());
        assert!(matches!(load_dist("uniform:x"), Err(Error::InvalidArgument(_))));
    }
}
