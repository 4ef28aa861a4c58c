//! Exhaustive revenue optimization over payment grids.
//!
//! Every entry `p_{-i}(v_{-i})` is a variable ranging over a candidate
//! price list. Expected revenue and feasibility both decompose into one
//! factor per instance, so the exact optimum over the whole product space
//! is found by variable elimination instead of listing grids one by one.
//! [`enumerate_optimal`] does the literal listing and serves as the oracle
//! on small spaces.

mod naive;
mod ve;

pub use naive::enumerate_optimal;

use std::collections::BTreeMap;
use std::time::Instant;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::JointDistribution;
use crate::error::{Error, Result};
use crate::mechanism::{
    expected_revenue, is_truthful, select_winner, side_condition, PaymentGrid, Price, ProfitMaximizer,
    TieBreak,
};
use crate::rational::Rational;
use ve::{Cell, Factor};

pub const DEFAULT_CAP: u128 = 50_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Truthful,
    Moral,
}

/// Tie-breaker among grids with equal revenue, maximized after revenue.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Secondary {
    #[default]
    None,
    NoSaleProbability,
}

/// `values ∪ (values + step) ∪ {Never}`, ascending with `Never` last.
pub fn default_candidates(values: &[Rational], step: &Rational) -> Vec<Price> {
    let mut xs: Vec<Rational> = values.to_vec();
    xs.extend(values.iter().map(|v| v + step));
    finish_candidates(xs)
}

/// Every multiple of `step / k` from 0 to `max(values) + step`, plus
/// `Never`. Used to audit that [`default_candidates`] loses nothing.
pub fn refined_candidates(values: &[Rational], step: &Rational, k: u32) -> Vec<Price> {
    let top = values.iter().max().cloned().unwrap_or_else(Rational::zero) + step;
    let fine = step / &Rational::int(k.max(1) as i64);
    let mut xs = vec![];
    let mut x = Rational::zero();
    while x <= top {
        xs.push(x.clone());
        x += &fine;
    }
    xs.extend(values.iter().cloned());
    finish_candidates(xs)
}

fn finish_candidates(mut xs: Vec<Rational>) -> Vec<Price> {
    xs.retain(|x| !x.is_negative());
    xs.sort();
    xs.dedup();
    let mut out: Vec<Price> = xs.into_iter().map(Price::Finite).collect();
    out.push(Price::Never);
    out
}

/// A finite price above every value a player can have behaves exactly like
/// `Never`; fold those together.
fn collapse_for(values: &[Rational], cands: &[Price]) -> Vec<Price> {
    let top = values.iter().max().expect("nonempty value set");
    let mut out: Vec<Price> = cands
        .iter()
        .map(|p| match p {
            Price::Finite(x) if x > top => Price::Never,
            other => other.clone(),
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

#[derive(Clone, Debug)]
pub struct SearchSpace {
    pub values: Vec<Vec<Rational>>,
    /// Per player, ascending, no duplicates.
    pub candidates: Vec<Vec<Price>>,
    pub mode: Mode,
    /// Ignored in truthful mode.
    pub alpha: Rational,
    pub tiebreak: TieBreak,
}

impl SearchSpace {
    /// Default candidates over the union of all value sets, with the step
    /// taken as the largest common divisor of the values.
    pub fn new(values: Vec<Vec<Rational>>, mode: Mode, alpha: Rational) -> Result<Self> {
        PaymentGrid::from_fn(values.clone(), |_, _| Price::Never)?;
        if alpha.is_negative() || alpha > Rational::one() {
            return Err(Error::InvalidArgument(format!("alpha = {alpha} is outside [0, 1]")));
        }
        let mut all: Vec<Rational> = values.iter().flatten().cloned().collect();
        all.sort();
        all.dedup();
        let step = Rational::gcd_all(&all).unwrap_or_else(Rational::one);
        let base = default_candidates(&all, &step);
        let candidates = values.iter().map(|v| collapse_for(v, &base)).collect();
        Ok(SearchSpace {
            values,
            candidates,
            mode,
            alpha,
            tiebreak: TieBreak::default(),
        })
    }

    pub fn with_candidates(mut self, candidates: Vec<Vec<Price>>) -> Result<Self> {
        if candidates.len() != self.values.len() || candidates.iter().any(Vec::is_empty) {
            return Err(Error::InvalidArgument("one nonempty candidate list per player".into()));
        }
        self.candidates = candidates
            .into_iter()
            .zip(&self.values)
            .map(|(c, v)| collapse_for(v, &c))
            .collect();
        Ok(self)
    }

    /// Refined audit lattice with `k` points per step.
    pub fn refined(self, k: u32) -> Result<Self> {
        let mut all: Vec<Rational> = self.values.iter().flatten().cloned().collect();
        all.sort();
        all.dedup();
        let step = Rational::gcd_all(&all).unwrap_or_else(Rational::one);
        let c = refined_candidates(&all, &step, k);
        let n = self.values.len();
        self.with_candidates(vec![c; n])
    }

    /// Fixes every price of player `i` to `price`.
    pub fn force_player(mut self, i: usize, price: Price) -> Self {
        self.candidates[i] = vec![price];
        self
    }

    fn shape(&self) -> PaymentGrid {
        PaymentGrid::from_fn(self.values.clone(), |_, _| Price::Never).expect("validated")
    }

    /// Number of grids in the unpruned space.
    pub fn space_size(&self) -> BigUint {
        let g = self.shape();
        (0..g.n()).fold(BigUint::one(), |acc, i| {
            acc * BigUint::from(self.candidates[i].len()).pow(g.tuple_count(i) as u32)
        })
    }

    fn effective_alpha(&self) -> Rational {
        match self.mode {
            Mode::Truthful => Rational::zero(),
            Mode::Moral => self.alpha.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SearchOptions {
    /// Bound on variable-elimination work, in table cells per run.
    pub cap: u128,
    pub threads: Option<usize>,
    /// Share one price table among all players when the joint and the
    /// space are symmetric under player exchange. This restricts the space:
    /// optimal discrete auctions are generally asymmetric (one player sees
    /// `v`, the other `v + step`), so the result is only a lower bound.
    pub symmetry: bool,
    pub secondary: Secondary,
    /// Return the lexicographically smallest optimal grid (one re-solve per
    /// variable). When off, some optimal grid is returned from a single
    /// solve.
    pub lex_smallest: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            cap: DEFAULT_CAP,
            threads: None,
            symmetry: false,
            secondary: Secondary::None,
            lex_smallest: true,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchResult {
    pub mode: Mode,
    pub alpha: Rational,
    pub best_revenue: Rational,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_secondary: Option<Rational>,
    #[serde(skip)]
    pub best_grid: PaymentGrid,
    /// Grids in the (possibly pruned) space reaching the optimum; saturates
    /// at `u128::MAX`.
    pub optima_count: u128,
    pub is_truthful_flag: bool,
    pub symmetric: bool,
    pub space_size: String,
    pub work: u128,
}

/// Runs `f` on a pool with `threads` workers, or on the current pool when
/// `threads` is unset or we are already inside a pool. Nesting pools would
/// let a blocked worker steal outer jobs onto its own stack.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    if rayon::current_thread_index().is_some() {
        return Ok(f());
    }
    match threads {
        None => Ok(f()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

struct Model {
    dom: Vec<usize>,
    /// Candidate list of each variable.
    var_prices: Vec<Vec<Price>>,
    /// Variable of each grid entry, player-major.
    entry_var: Vec<Vec<usize>>,
    factors: Vec<Factor>,
    scale: BigInt,
    scale2: BigInt,
}

fn lcm_denoms<'a>(xs: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    xs.into_iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()))
}

fn to_i128(x: &Rational) -> Result<i128> {
    debug_assert!(x.is_integer());
    x.numer().to_i128().ok_or(Error::Overflow)
}

fn build_model(space: &SearchSpace, joint: &JointDistribution, opts: &SearchOptions, symmetric: bool) -> Result<Model> {
    let g = space.shape();
    let n = g.n();
    let alpha = space.effective_alpha();
    // variables
    let mut entry_var: Vec<Vec<usize>> = vec![];
    let mut keys: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    let mut var_prices: Vec<Vec<Price>> = vec![];
    for i in 0..n {
        let mut row = vec![];
        for t in 0..g.tuple_count(i) {
            let v = if symmetric {
                let mut key = g.tuple_profile(i, t);
                key.sort_unstable();
                *keys.entry(key).or_insert_with(|| {
                    var_prices.push(space.candidates[0].clone());
                    var_prices.len() - 1
                })
            } else {
                var_prices.push(space.candidates[i].clone());
                var_prices.len() - 1
            };
            row.push(v);
        }
        entry_var.push(row);
    }
    let dom: Vec<usize> = var_prices.iter().map(Vec::len).collect();

    // weights and scaling
    let mut weight = vec![Rational::zero(); g.instance_count()];
    for a in joint.atoms() {
        let idx = g.indices_of(&a.profile)?;
        weight[g.flat_of(&idx)] += &a.weight;
    }
    let finite = var_prices.iter().flatten().filter_map(Price::finite);
    let scale2 = lcm_denoms(weight.iter());
    let scale = &scale2 * lcm_denoms(finite);
    let scale_r = Rational::from_big(scale.clone(), BigInt::one());
    let scale2_r = Rational::from_big(scale2.clone(), BigInt::one());

    let feasibility_everywhere = space.mode == Mode::Truthful || alpha < Rational::one();
    let mut grouped: BTreeMap<Vec<usize>, Vec<Cell>> = BTreeMap::new();
    let mut bound = Rational::zero();
    for flat in 0..g.instance_count() {
        let w = &weight[flat];
        if w.is_zero() && !feasibility_everywhere {
            continue;
        }
        let idx = g.profile_of(flat);
        let values = g.values_of(&idx);
        let vars: Vec<usize> = (0..n).map(|i| entry_var[i][g.tuple_index(i, &idx)]).collect();
        let mut scope = vars.clone();
        scope.sort_unstable();
        scope.dedup();
        let pos: Vec<usize> = vars.iter().map(|v| scope.binary_search(v).unwrap()).collect();
        let size: usize = scope.iter().map(|&v| dom[v]).product();
        let max_price = vars
            .iter()
            .flat_map(|&v| var_prices[v].iter().filter_map(Price::finite))
            .max()
            .cloned()
            .unwrap_or_else(Rational::zero);
        bound += w * &(max_price + Rational::one());
        let mut table = Vec::with_capacity(size);
        let mut digits = vec![0usize; scope.len()];
        for _ in 0..size {
            let prices: Vec<&Price> = (0..n).map(|i| &var_prices[vars[i]][digits[pos[i]]]).collect();
            table.push(instance_cell(&values, &prices, w, space, &alpha, opts.secondary, &scale_r, &scale2_r)?);
            for k in (0..digits.len()).rev() {
                digits[k] += 1;
                if digits[k] < dom[scope[k]] {
                    break;
                }
                digits[k] = 0;
            }
        }
        match grouped.get_mut(&scope) {
            Some(t) => {
                for (a, b) in t.iter_mut().zip(table) {
                    *a = if a.feasible() && b.feasible() {
                        Cell { p: a.p + b.p, s: a.s + b.s, c: 1 }
                    } else {
                        Cell::INFEASIBLE
                    };
                }
            }
            None => {
                grouped.insert(scope, table);
            }
        }
    }
    // sums of up to all instances must stay far from the i128 edge
    let limit = Rational::from_big(BigInt::from(i128::MAX / 4), BigInt::one());
    if &bound * &scale_r > limit || scale2_r > limit {
        return Err(Error::Overflow);
    }
    let factors = grouped.into_iter().map(|(scope, table)| Factor { scope, table }).collect();
    Ok(Model {
        dom,
        var_prices,
        entry_var,
        factors,
        scale,
        scale2,
    })
}

#[allow(clippy::too_many_arguments)]
fn instance_cell(
    values: &[Rational],
    prices: &[&Price],
    w: &Rational,
    space: &SearchSpace,
    alpha: &Rational,
    secondary: Secondary,
    scale: &Rational,
    scale2: &Rational,
) -> Result<Cell> {
    let winner = select_winner(values, prices, space.tiebreak, true);
    let profits: Vec<Option<Rational>> = values.iter().zip(prices).map(|(v, p)| p.profit(v)).collect();
    let feasible = match winner {
        None => true,
        Some(k) => {
            let top = profits[k].as_ref().expect("winner has a price");
            let cap = alpha * top;
            profits
                .iter()
                .enumerate()
                .all(|(j, pj)| j == k || pj.as_ref().is_none_or(|x| *x <= cap))
        }
    };
    if !feasible {
        return Ok(Cell::INFEASIBLE);
    }
    let p = match winner {
        Some(k) => to_i128(&(w * prices[k].finite().unwrap() * scale))?,
        None => 0,
    };
    let s = match (secondary, winner) {
        (Secondary::NoSaleProbability, None) => to_i128(&(w * scale2))?,
        _ => 0,
    };
    Ok(Cell { p, s, c: 1 })
}

fn all_vars(m: &Model) -> Vec<usize> {
    (0..m.dom.len()).collect()
}

fn run(m: &Model, factors: Vec<Factor>, vars: &[usize], cap: u128) -> Result<(Cell, u128)> {
    let (order, work) = ve::elimination_order(&m.dom, &factors, vars);
    if work > cap {
        return Err(Error::SpaceTooLarge { work, cap });
    }
    Ok((ve::solve(&m.dom, factors, &order), work))
}

fn symmetric_applies(space: &SearchSpace, joint: &JointDistribution, opts: &SearchOptions) -> bool {
    let n = space.values.len();
    opts.symmetry
        && n >= 2
        && space.values.iter().all(|v| *v == space.values[0])
        && space.candidates.iter().all(|c| *c == space.candidates[0])
        && joint.is_exchangeable()
}

/// Revenue-maximizing grid of the space under `joint`. Among optima the
/// lexicographically smallest grid (player-major, prices ascending with
/// `Never` last) is returned unless `opts.lex_smallest` is off.
pub fn brute_force_optimal(
    space: &SearchSpace,
    joint: &JointDistribution,
    opts: &SearchOptions,
) -> Result<SearchResult> {
    if joint.n() != space.values.len() {
        return Err(Error::InvalidArgument(format!(
            "joint has {} players, space has {}",
            joint.n(),
            space.values.len()
        )));
    }
    with_threads(opts.threads, || solve_space(space, joint, opts))?
}

fn solve_space(space: &SearchSpace, joint: &JointDistribution, opts: &SearchOptions) -> Result<SearchResult> {
    let symmetric = symmetric_applies(space, joint, opts);
    let m = build_model(space, joint, opts, symmetric)?;
    let (order, work) = ve::elimination_order(&m.dom, &m.factors, &all_vars(&m));
    if work > opts.cap {
        return Err(Error::SpaceTooLarge { work, cap: opts.cap });
    }
    let choice = if opts.lex_smallest {
        let best = ve::solve(&m.dom, m.factors.clone(), &order);
        if !best.feasible() {
            return Err(Error::InfeasibleSpace);
        }
        (best, lex_smallest_choice(&m, best)?)
    } else {
        ve::solve_with_assignment(&m.dom, m.factors.clone(), &order)
    };
    let (best, choice) = choice;
    if !best.feasible() {
        return Err(Error::InfeasibleSpace);
    }

    let prices: Vec<Vec<Price>> = m
        .entry_var
        .iter()
        .map(|row| row.iter().map(|&v| m.var_prices[v][choice[v]].clone()).collect())
        .collect();
    let grid = PaymentGrid::new(space.values.clone(), prices)?;
    let revenue = Rational::from_big(BigInt::from(best.p), m.scale.clone());
    let secondary = match opts.secondary {
        Secondary::None => None,
        Secondary::NoSaleProbability => Some(Rational::from_big(BigInt::from(best.s), m.scale2.clone())),
    };

    let mech = ProfitMaximizer::new(grid.clone(), space.effective_alpha()).with_tiebreak(space.tiebreak);
    if expected_revenue(&mech, joint)? != revenue {
        return Err(Error::Defect("search revenue disagrees with direct evaluation".into()));
    }
    if !side_condition(&mech, &space.effective_alpha()).holds() {
        return Err(Error::Defect("search returned an infeasible grid".into()));
    }
    Ok(SearchResult {
        mode: space.mode,
        alpha: space.effective_alpha(),
        best_revenue: revenue,
        best_secondary: secondary,
        is_truthful_flag: is_truthful(&mech).holds(),
        best_grid: grid,
        optima_count: best.c,
        symmetric,
        space_size: space.space_size().to_string(),
        work,
    })
}

/// Fixes variables in order of first appearance, each to its smallest value
/// that keeps the optimum reachable.
fn lex_smallest_choice(m: &Model, best: Cell) -> Result<Vec<usize>> {
    let mut factors = m.factors.clone();
    let mut choice: Vec<Option<usize>> = vec![None; m.dom.len()];
    let mut free: Vec<usize> = all_vars(m);
    for &var in m.entry_var.iter().flatten() {
        if choice[var].is_some() {
            continue;
        }
        free.retain(|&v| v != var);
        let reached: Vec<Result<bool>> = (0..m.dom[var])
            .into_par_iter()
            .map(|val| {
                let fs: Vec<Factor> = factors.iter().map(|f| f.restrict(var, val, &m.dom)).collect();
                let (c, _) = run(m, fs, &free, u128::MAX)?;
                Ok(c.feasible() && c.key() == best.key())
            })
            .collect();
        let mut pick = None;
        for (val, r) in reached.into_iter().enumerate() {
            if r? {
                pick = Some(val);
                break;
            }
        }
        let val = pick.ok_or_else(|| Error::Defect("optimum lost during traceback".into()))?;
        factors = factors.iter().map(|f| f.restrict(var, val, &m.dom)).collect();
        choice[var] = Some(val);
    }
    Ok(choice.into_iter().map(|c| c.unwrap_or(0)).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub alpha: Rational,
    pub result: SearchResult,
}

/// Optimal moral revenue for each `alpha`; revenue must not decrease as
/// `alpha` grows.
pub fn optimal_alpha_sweep(
    values: &[Vec<Rational>],
    joint: &JointDistribution,
    alphas: &[Rational],
    opts: &SearchOptions,
) -> Result<Vec<SweepRow>> {
    let mut sorted = alphas.to_vec();
    sorted.sort();
    sorted.dedup();
    let mut rows: Vec<SweepRow> = vec![];
    for a in sorted {
        let space = SearchSpace::new(values.to_vec(), Mode::Moral, a.clone())?;
        let result = brute_force_optimal(&space, joint, opts)?;
        if let Some(prev) = rows.last() {
            if result.best_revenue < prev.result.best_revenue {
                return Err(Error::Defect(format!(
                    "optimal revenue drops from alpha {} to {a}",
                    prev.alpha
                )));
            }
        }
        rows.push(SweepRow { alpha: a, result });
    }
    Ok(rows)
}

/// Elapsed-time wrapper used by the CLI.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed().as_secs_f64())
}

#[cfg(test)]
mod tests;
