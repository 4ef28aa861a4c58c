//! File formats, strict JSON reading, atomic writes and tabular emission.
//! Player indices are 1-based everywhere in this module's formats.

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{MoralityReport, PaymentGrid, Price, ProfitMaximizer, TieBreak};
use crate::rational::Rational;

pub fn fmt_profile(p: &[Rational]) -> String {
    let parts: Vec<String> = p.iter().map(ToString::to_string).collect();
    format!("({})", parts.join(", "))
}

/// Parses JSON text, naming the offending field on failure.
pub fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        Error::Parse {
            path: if at == "." { origin.to_string() } else { format!("{origin} at {at}") },
            message: e.into_inner().to_string(),
        }
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_json(&text, &path.display().to_string())
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub player: Option<usize>,
    pub opponents: Vec<Rational>,
    pub price: Price,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverrideEntry {
    pub instance: Vec<Rational>,
    /// `null` declines the sale.
    pub winner: Option<usize>,
}

/// On-disk payment grid. Entries either all carry `player` or none do; in
/// the latter case they are read player-major in tuple order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub values: Vec<Vec<Rational>>,
    pub prices: Vec<PriceEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tiebreak: Option<TieBreak>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sell_at_zero_profit: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<OverrideEntry>,
}

impl GridFile {
    pub fn from_mechanism(m: &ProfitMaximizer) -> Self {
        let g = &m.grid;
        let prices = (0..g.n())
            .flat_map(|i| {
                (0..g.tuple_count(i)).map(move |t| PriceEntry {
                    player: Some(i + 1),
                    opponents: g.opponent_values(i, t),
                    price: g.price(i, t).clone(),
                })
            })
            .collect();
        let overrides = m
            .overrides()
            .iter()
            .map(|(profile, w)| OverrideEntry {
                instance: g.values_of(profile),
                winner: w.map(|k| k + 1),
            })
            .collect();
        GridFile {
            n: Some(g.n()),
            values: g.value_sets().to_vec(),
            prices,
            alpha: Some(m.alpha.clone()),
            tiebreak: Some(m.tiebreak),
            sell_at_zero_profit: Some(m.sell_at_zero_profit),
            overrides,
        }
    }

    /// Builds the mechanism; `alpha` defaults to 1.
    pub fn to_mechanism(&self) -> Result<ProfitMaximizer> {
        if let Some(n) = self.n {
            if n != self.values.len() {
                return Err(Error::InvalidGrid(format!("n = {n} but {} value sets", self.values.len())));
            }
        }
        let shape = PaymentGrid::from_fn(self.values.clone(), |_, _| Price::Never)?;
        let mut slots: Vec<Vec<Option<Price>>> =
            (0..shape.n()).map(|i| vec![None; shape.tuple_count(i)]).collect();
        let tagged = self.prices.iter().filter(|e| e.player.is_some()).count();
        if tagged != 0 && tagged != self.prices.len() {
            return Err(Error::InvalidGrid("either every price entry names its player or none does".into()));
        }
        if tagged == 0 {
            let total: usize = slots.iter().map(Vec::len).sum();
            if self.prices.len() != total {
                return Err(Error::InvalidGrid(format!(
                    "{} price entries, expected {total}",
                    self.prices.len()
                )));
            }
            let mut it = self.prices.iter();
            for (i, row) in slots.iter_mut().enumerate() {
                for (t, slot) in row.iter_mut().enumerate() {
                    let e = it.next().expect("counted");
                    if e.opponents != shape.opponent_values(i, t) {
                        return Err(Error::InvalidGrid(format!(
                            "entry for player {} expected opponents {}, found {}",
                            i + 1,
                            fmt_profile(&shape.opponent_values(i, t)),
                            fmt_profile(&e.opponents)
                        )));
                    }
                    *slot = Some(e.price.clone());
                }
            }
        } else {
            for e in &self.prices {
                let i = e.player.expect("tagged");
                if i == 0 || i > shape.n() {
                    return Err(Error::InvalidGrid(format!("player {i} out of range")));
                }
                let i = i - 1;
                if e.opponents.len() + 1 != shape.n() {
                    return Err(Error::InvalidGrid(format!(
                        "opponents {} have the wrong length",
                        fmt_profile(&e.opponents)
                    )));
                }
                let mut full = e.opponents.clone();
                full.insert(i, shape.values(i)[0].clone());
                let idx = shape.indices_of(&full)?;
                let t = shape.tuple_index(i, &idx);
                if slots[i][t].replace(e.price.clone()).is_some() {
                    return Err(Error::InvalidGrid(format!(
                        "duplicate entry for player {} against {}",
                        i + 1,
                        fmt_profile(&e.opponents)
                    )));
                }
            }
        }
        let mut prices = vec![];
        for (i, row) in slots.into_iter().enumerate() {
            let mut out = vec![];
            for (t, p) in row.into_iter().enumerate() {
                out.push(p.ok_or_else(|| {
                    Error::InvalidGrid(format!(
                        "missing entry for player {} against {}",
                        i + 1,
                        fmt_profile(&shape.opponent_values(i, t))
                    ))
                })?);
            }
            prices.push(out);
        }
        let grid = PaymentGrid::new(self.values.clone(), prices)?;
        let mut m = ProfitMaximizer::new(grid, self.alpha.clone().unwrap_or_else(Rational::one));
        if let Some(tb) = self.tiebreak {
            m = m.with_tiebreak(tb);
        }
        if let Some(z) = self.sell_at_zero_profit {
            m = m.with_zero_profit_sales(z);
        }
        for o in &self.overrides {
            let idx = m.grid.indices_of(&o.instance)?;
            let w = match o.winner {
                Some(0) => return Err(Error::InvalidGrid("override winner 0; players are 1-based".into())),
                Some(k) if k > m.grid.n() => return Err(Error::InvalidGrid(format!("override winner {k} out of range"))),
                Some(k) => Some(k - 1),
                None => None,
            };
            m.set_override(&idx, w)?;
        }
        Ok(m)
    }
}

pub fn read_mechanism(path: &Path) -> Result<ProfitMaximizer> {
    read_json::<GridFile>(path)?.to_mechanism()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ViolationRow {
    pub instance: Vec<Rational>,
    pub deviator: usize,
    pub lie: Rational,
    pub gain: Rational,
    pub loss: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MoralityReportFile {
    pub alpha: Rational,
    pub moral: bool,
    pub violations: Vec<ViolationRow>,
}

impl From<&MoralityReport> for MoralityReportFile {
    fn from(r: &MoralityReport) -> Self {
        MoralityReportFile {
            alpha: r.alpha.clone(),
            moral: r.moral,
            violations: r
                .violations
                .iter()
                .map(|v| ViolationRow {
                    instance: v.instance.clone(),
                    deviator: v.deviator + 1,
                    lie: v.lie.clone(),
                    gain: v.gain.clone(),
                    loss: v.others_loss.clone(),
                })
                .collect(),
        }
    }
}

/// CSV with columns instance, deviator, lie, gain, loss.
pub fn morality_csv(r: &MoralityReport) -> String {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(["instance", "deviator", "lie", "gain", "loss"]).expect("in-memory");
    for v in MoralityReportFile::from(r).violations {
        w.write_record([
            fmt_profile(&v.instance),
            v.deviator.to_string(),
            v.lie.to_string(),
            v.gain.to_string(),
            v.loss.to_string(),
        ])
        .expect("in-memory");
    }
    String::from_utf8(w.into_inner().expect("in-memory")).expect("utf8")
}

/// CSV from a header and rows of already formatted cells.
pub fn rows_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(header).expect("in-memory");
    for r in rows {
        w.write_record(r).expect("in-memory");
    }
    String::from_utf8(w.into_inner().expect("in-memory")).expect("utf8")
}

/// Left-aligned plain-text table.
pub fn rows_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (k, c) in r.iter().enumerate() {
            width[k] = width[k].max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&width)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    out += &line(width.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect());
    for r in rows {
        out += &line(r.iter().map(String::as_str).collect());
    }
    out
}
