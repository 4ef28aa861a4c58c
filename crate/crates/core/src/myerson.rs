//! Closed-form optimal truthful grids for independent regular values, and
//! the lifting procedure that turns a 1-moral grid over iid standard values
//! into a truthful one without losing revenue.

use std::cmp::Ordering;

use serde::Serialize;

use crate::distributions::{product_joint, DiscreteDistribution, JointDistribution};
use crate::error::{Error, Result};
use crate::mechanism::{instance_weights, is_truthful, PaymentGrid, Price, ProfitMaximizer, TieBreak};
use crate::rational::Rational;
use crate::Check;

/// Per player and opponent tuple, the smallest own value whose virtual value
/// reaches the opponents' best, floored at the player's reserve. `None`
/// where no own value reaches it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct QFunction {
    pub values: Vec<Vec<Rational>>,
    pub q: Vec<Vec<Option<Rational>>>,
}

/// Player index and the two opponent tuples that break monotonicity.
pub type MonotoneWitness = (usize, Vec<Rational>, Vec<Rational>);

impl QFunction {
    pub fn new(ds: &[DiscreteDistribution]) -> Result<Self> {
        let values: Vec<Vec<Rational>> = ds.iter().map(|d| d.values()).collect();
        let phis = ds.iter().map(|d| d.virtual_values()).collect::<Result<Vec<_>>>()?;
        let reserves = ds.iter().map(|d| d.reserve_price()).collect::<Result<Vec<_>>>()?;
        let shape = PaymentGrid::from_fn(values.clone(), |_, _| Price::Never)?;
        let mut q = Vec::with_capacity(ds.len());
        for i in 0..ds.len() {
            let row = (0..shape.tuple_count(i))
                .map(|t| {
                    let Some(best) = opponents_best_phi(&shape, &phis, i, t) else {
                        return Ok(Some(reserves[i].clone()));
                    };
                    match ds[i].phi_inverse(&best) {
                        Ok(v) => Ok(Some(v.max(reserves[i].clone()))),
                        Err(Error::NoPreimage { .. }) => Ok(None),
                        Err(e) => Err(e),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            q.push(row);
        }
        Ok(QFunction { values, q })
    }

    pub fn get(&self, i: usize, t: usize) -> Option<&Rational> {
        self.q[i][t].as_ref()
    }

    /// Raising any single opponent value never lowers `q` (`None` counts as
    /// above everything). Witness: player and the two opponent tuples.
    pub fn is_monotone(&self) -> Result<Check<MonotoneWitness>> {
        let shape = PaymentGrid::from_fn(self.values.clone(), |_, _| Price::Never)?;
        let rank = |x: &Option<Rational>| x.clone().map_or(Price::Never, Price::Finite);
        for i in 0..shape.n() {
            let others: Vec<usize> = (0..shape.n()).filter(|&k| k != i).collect();
            for t in 0..shape.tuple_count(i) {
                let prof = shape.tuple_profile(i, t);
                for (pos, &k) in others.iter().enumerate() {
                    if prof[pos] + 1 >= shape.values(k).len() {
                        continue;
                    }
                    let mut up = prof.clone();
                    up[pos] += 1;
                    let mut full = up.clone();
                    full.insert(i, 0);
                    let t_up = shape.tuple_index(i, &full);
                    if rank(&self.q[i][t]) > rank(&self.q[i][t_up]) {
                        return Ok(Check::Fails((
                            i,
                            shape.opponent_values(i, t),
                            shape.opponent_values(i, t_up),
                        )));
                    }
                }
            }
        }
        Ok(Check::Holds)
    }
}

fn opponents_best_phi(shape: &PaymentGrid, phis: &[Vec<Rational>], i: usize, t: usize) -> Option<Rational> {
    let others = (0..shape.n()).filter(|&k| k != i);
    others
        .zip(shape.tuple_profile(i, t))
        .map(|(k, x)| phis[k][x].clone())
        .max()
}

/// An entry whose price is neither `q` nor the next grid value above it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PatternException {
    pub player: usize,
    pub opponents: Vec<Rational>,
    pub price: Price,
    pub q: Option<Rational>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MyersonGrid {
    #[serde(skip)]
    pub mechanism: ProfitMaximizer,
    pub reserves: Vec<Rational>,
    pub q: QFunction,
    pub pattern_exceptions: Vec<PatternException>,
}

/// Winner at an index profile: among players with non-negative virtual
/// value, the highest virtual value, then the highest value, then the
/// lowest index.
fn designated(values: &[Vec<Rational>], phis: &[Vec<Rational>], profile: &[usize]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &x) in profile.iter().enumerate() {
        if phis[k][x].is_negative() {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                let bx = profile[b];
                match phis[k][x].cmp(&phis[b][bx]) {
                    Ordering::Greater => true,
                    Ordering::Less => false,
                    Ordering::Equal => values[k][x] > values[b][bx],
                }
            }
        };
        if better {
            best = Some(k);
        }
    }
    best
}

/// Optimal truthful grid for independent regular marginals, one per player.
///
/// Each price is the smallest own value at which the player is designated
/// (see [`designated`]) against that opponent tuple. The resulting
/// allocation is checked against the designation at every instance, and
/// prices outside `{q, q + step}` are listed as pattern exceptions.
pub fn myerson_grid(ds: &[DiscreteDistribution]) -> Result<MyersonGrid> {
    if ds.is_empty() {
        return Err(Error::EmptyInput("no distributions".into()));
    }
    for d in ds {
        if let Check::Fails((lo, hi)) = d.is_regular()? {
            return Err(Error::NotRegular { lo: Box::new(lo), hi: Box::new(hi) });
        }
    }
    let values: Vec<Vec<Rational>> = ds.iter().map(|d| d.values()).collect();
    let phis = ds.iter().map(|d| d.virtual_values()).collect::<Result<Vec<_>>>()?;
    let reserves = ds.iter().map(|d| d.reserve_price()).collect::<Result<Vec<_>>>()?;
    let mut grid = PaymentGrid::from_fn(values.clone(), |_, _| Price::Never)?;
    for i in 0..grid.n() {
        for t in 0..grid.tuple_count(i) {
            let wins: Vec<bool> = (0..values[i].len())
                .map(|own| designated(&values, &phis, &grid.with_own(i, t, own)) == Some(i))
                .collect();
            let first = wins.iter().position(|&w| w);
            if let Some(k) = first {
                if wins[k..].iter().any(|&w| !w) {
                    return Err(Error::Defect(format!(
                        "designation of player {} not monotone against {:?}",
                        i + 1,
                        grid.opponent_values(i, t)
                    )));
                }
            }
            let p = first.map_or(Price::Never, |k| Price::Finite(values[i][k].clone()));
            grid.set_price(i, t, p)?;
        }
    }
    let mechanism = ProfitMaximizer::new(grid, Rational::zero());
    for flat in 0..mechanism.grid.instance_count() {
        let profile = mechanism.grid.profile_of(flat);
        let want = designated(&values, &phis, &profile);
        if mechanism.allocate_indices(&profile).winner != want {
            return Err(Error::Defect(format!(
                "grid allocation differs from designation at {:?}",
                mechanism.grid.values_of(&profile)
            )));
        }
    }
    if let Check::Fails(at) = is_truthful(&mechanism) {
        return Err(Error::Defect(format!("closed-form grid not truthful at {at:?}")));
    }
    let q = QFunction::new(ds)?;
    let mut pattern_exceptions = vec![];
    let g = &mechanism.grid;
    for i in 0..g.n() {
        for t in 0..g.tuple_count(i) {
            let qv = q.get(i, t);
            let allowed: Vec<Price> = match qv {
                None => vec![Price::Never],
                Some(v) => {
                    let k = g.index_of_value(i, v)?;
                    let next = g.values(i).get(k + 1).cloned().map_or(Price::Never, Price::Finite);
                    vec![Price::Finite(v.clone()), next]
                }
            };
            if !allowed.contains(g.price(i, t)) {
                pattern_exceptions.push(PatternException {
                    player: i + 1,
                    opponents: g.opponent_values(i, t),
                    price: g.price(i, t).clone(),
                    q: qv.cloned(),
                });
            }
        }
    }
    Ok(MyersonGrid {
        mechanism,
        reserves,
        q,
        pattern_exceptions,
    })
}

/// Two-player iid shape: player 1 faces `v2` and player 2 faces the next
/// grid value above `v1` whenever the opponent is at or above `reserve`,
/// and both face `reserve` below it. Witness: player (1-based) and the
/// opponent value.
pub fn critical_price_pattern(m: &ProfitMaximizer, reserve: &Rational) -> Check<(usize, Rational)> {
    let g = &m.grid;
    if g.n() != 2 {
        return Check::Fails((0, Rational::zero()));
    }
    for i in 0..2 {
        let vs = g.values(1 - i);
        for (t, v) in vs.iter().enumerate() {
            let want = if v < reserve {
                Price::Finite(reserve.clone())
            } else if i == 0 {
                Price::Finite(v.clone())
            } else {
                vs.get(t + 1).cloned().map_or(Price::Never, Price::Finite)
            };
            if g.price(i, t) != &want {
                return Check::Fails((i + 1, v.clone()));
            }
        }
    }
    Check::Holds
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LiftRule {
    /// Tie-break, zero-profit sales and overrides reset to revenue-favoring
    /// defaults.
    Normalize,
    /// Raises a price lying strictly between two grid values to the upper one.
    SnapToGrid,
    SmallerPrice,
    /// Lowers the price of the highest opponent toward its own value by one
    /// step, ahead of a swap.
    LowerToRevenueMax,
    HigherPriceSwap,
    BelowReserve,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PriceChange {
    pub player: usize,
    pub opponents: Vec<Rational>,
    pub before: Price,
    pub after: Price,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LiftStep {
    pub rule: LiftRule,
    /// 1-based player and opponent values of the targeted entry.
    pub player: usize,
    pub opponents: Vec<Rational>,
    pub changes: Vec<PriceChange>,
    pub revenue_before: Rational,
    pub revenue_after: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LiftTrace {
    pub reserve: Rational,
    pub initial_revenue: Rational,
    pub final_revenue: Rational,
    pub steps: Vec<LiftStep>,
}

impl LiftTrace {
    pub fn is_non_decreasing(&self) -> bool {
        self.steps.iter().all(|s| s.revenue_after >= s.revenue_before)
            && self.steps.windows(2).all(|w| w[0].revenue_after == w[1].revenue_before)
    }
}

/// Descending-sorted opponent values, the order in which violations are
/// repaired (larger first).
fn sort_key(g: &PaymentGrid, i: usize, t: usize) -> Vec<Rational> {
    let mut v = g.opponent_values(i, t);
    v.sort_unstable_by(|a, b| b.cmp(a));
    v
}

fn max_of(v: &[Rational]) -> Rational {
    v.iter().max().cloned().unwrap_or_default()
}

struct Lifter<'a> {
    m: ProfitMaximizer,
    weights: Vec<Rational>,
    values: &'a [Rational],
    reserve: Rational,
    revenue: Rational,
    steps: Vec<LiftStep>,
    cap: usize,
}

impl Lifter<'_> {
    fn revenue_of(&self, m: &ProfitMaximizer) -> Rational {
        m.outcomes()
            .iter()
            .zip(&self.weights)
            .filter(|(o, w)| o.winner.is_some() && !w.is_zero())
            .map(|(o, w)| w * &o.payment)
            .sum()
    }

    /// Grid value one step above `p`, `Never` past the top.
    fn up(&self, p: &Price) -> Result<Price> {
        match p {
            Price::Never => Ok(Price::Never),
            Price::Finite(x) => {
                let k = self.index(x)?;
                Ok(self.values.get(k + 1).cloned().map_or(Price::Never, Price::Finite))
            }
        }
    }

    fn index(&self, x: &Rational) -> Result<usize> {
        self.values.binary_search(x).map_err(|_| Error::off_grid(x, "lift price"))
    }

    fn instance_revenue(m: &ProfitMaximizer, profile: &[usize]) -> Rational {
        let o = m.allocate_indices(profile);
        if o.winner.is_some() {
            o.payment
        } else {
            Rational::zero()
        }
    }

    fn apply(&mut self, rule: LiftRule, i: usize, t: usize, edits: Vec<(usize, usize, Price)>) -> Result<ProfitMaximizer> {
        if self.steps.len() >= self.cap {
            return Err(Error::NonTermination { cap: self.cap });
        }
        let before = self.m.clone();
        let mut changes = vec![];
        for (k, tk, p) in edits {
            changes.push(PriceChange {
                player: k + 1,
                opponents: self.m.grid.opponent_values(k, tk),
                before: self.m.grid.price(k, tk).clone(),
                after: p.clone(),
            });
            self.m.grid.set_price(k, tk, p)?;
        }
        let after = self.revenue_of(&self.m);
        if after < self.revenue {
            return Err(Error::Defect(format!(
                "{rule:?} step on player {} against {:?} lowered revenue {} -> {}",
                i + 1,
                self.m.grid.opponent_values(i, t),
                self.revenue,
                after
            )));
        }
        self.steps.push(LiftStep {
            rule,
            player: i + 1,
            opponents: self.m.grid.opponent_values(i, t),
            changes,
            revenue_before: self.revenue.clone(),
            revenue_after: after.clone(),
        });
        self.revenue = after;
        Ok(before)
    }

    /// The repair target: largest under the descending-sort order, then
    /// lowest player, then lowest tuple.
    fn next_violation(&self) -> Option<(usize, usize)> {
        let g = &self.m.grid;
        let mut best: Option<(Vec<Rational>, usize, usize)> = None;
        for i in 0..g.n() {
            for t in 0..g.tuple_count(i) {
                let key = sort_key(g, i, t);
                let top = max_of(&key);
                if top < self.reserve || g.price(i, t) >= &Price::Finite(top) {
                    continue;
                }
                if best.as_ref().is_none_or(|(b, _, _)| key > *b) {
                    best = Some((key, i, t));
                }
            }
        }
        best.map(|(_, i, t)| (i, t))
    }

    fn profit_nonneg(g: &PaymentGrid, profile: &[usize], k: usize) -> bool {
        let t = g.tuple_index(k, profile);
        g.price(k, t)
            .profit(&g.values(k)[profile[k]])
            .is_some_and(|p| !p.is_negative())
    }

    fn repair(&mut self, i: usize, t: usize) -> Result<()> {
        let g = &self.m.grid;
        let Price::Finite(p) = g.price(i, t).clone() else {
            unreachable!("violations have finite prices")
        };
        let k = self.index(&p)?;
        // only opponents valued at least p can break even while i's value is >= p
        for z in k..self.values.len() {
            let prof = g.with_own(i, t, z);
            for j in (0..g.n()).filter(|&j| j != i) {
                if Self::profit_nonneg(g, &prof, j) && g.values(j)[prof[j]] < p {
                    return Err(Error::Defect(format!(
                        "player {} breaks even below {} at {:?}",
                        j + 1,
                        p,
                        g.values_of(&prof)
                    )));
                }
            }
        }
        let at = g.with_own(i, t, k);
        let others_ok = (0..g.n()).any(|j| j != i && Self::profit_nonneg(g, &at, j));
        if others_ok {
            let raised = self.up(g.price(i, t))?;
            let before = self.apply(LiftRule::SmallerPrice, i, t, vec![(i, t, raised)])?;
            let opp_top = self.index(&max_of(&self.m.grid.opponent_values(i, t)))?;
            for z in k + 1..=opp_top {
                let prof = self.m.grid.with_own(i, t, z);
                if Self::instance_revenue(&self.m, &prof) < Self::instance_revenue(&before, &prof) {
                    return Err(Error::Defect(format!(
                        "raising a price lowered revenue at {:?}",
                        self.m.grid.values_of(&prof)
                    )));
                }
            }
            return Ok(());
        }
        // highest opponent, lowest index on ties
        let j = (0..g.n())
            .filter(|&j| j != i)
            .reduce(|a, b| if g.values(b)[at[b]] > g.values(a)[at[a]] { b } else { a })
            .expect("at least two players");
        let vj = g.values(j)[at[j]].clone();
        let tj = g.tuple_index(j, &at);
        let target = self.up(&Price::Finite(vj.clone()))?;
        while self.m.grid.price(j, tj) > &target {
            let lowered = match self.m.grid.price(j, tj) {
                Price::Never => Price::Finite(self.values.last().expect("nonempty").clone()),
                Price::Finite(x) => Price::Finite(self.values[self.index(x)? - 1].clone()),
            };
            self.apply(LiftRule::LowerToRevenueMax, j, tj, vec![(j, tj, lowered)])?;
        }
        if self.m.grid.price(j, tj) != &target {
            return Err(Error::Defect(format!(
                "player {} price {} is not one step above {}",
                j + 1,
                self.m.grid.price(j, tj),
                vj
            )));
        }
        let raised = self.up(&Price::Finite(p))?;
        self.apply(
            LiftRule::HigherPriceSwap,
            i,
            t,
            vec![(i, t, raised), (j, tj, Price::Finite(vj))],
        )?;
        Ok(())
    }
}

/// Lifts a 1-moral grid over iid values from `d` to a truthful grid whose
/// expected revenue is at least as high, recording every step.
///
/// Entries facing an opponent at or above the reserve and priced below the
/// opponents' maximum are repaired largest-first; then every entry facing
/// only opponents below the reserve is set to the reserve. Revenue is
/// recomputed exactly after each step and a decrease is a defect.
pub fn lift(m: &ProfitMaximizer, d: &DiscreteDistribution) -> Result<(ProfitMaximizer, LiftTrace)> {
    if m.alpha != Rational::one() {
        return Err(Error::InvalidArgument(format!("lift expects alpha = 1, got {}", m.alpha)));
    }
    if let Check::Fails((hi, lo)) = d.is_standard()? {
        return Err(Error::NotStandard { hi: Box::new(hi), lo: Box::new(lo) });
    }
    let n = m.grid.n();
    if n < 2 {
        return Err(Error::InvalidArgument("lift needs at least two players".into()));
    }
    let values = d.values();
    for i in 0..n {
        if m.grid.values(i) != values.as_slice() {
            return Err(Error::InvalidArgument(format!(
                "value set of player {} differs from the distribution's grid",
                i + 1
            )));
        }
    }
    let top = values.last().expect("nonempty").clone();
    let mut start = m.clone();
    for i in 0..n {
        for t in 0..start.grid.tuple_count(i) {
            if let Price::Finite(x) = start.grid.price(i, t) {
                if *x > top {
                    start.grid.set_price(i, t, Price::Never)?;
                }
            }
        }
    }
    let joint: JointDistribution = product_joint(&vec![d.clone(); n])?;
    let weights = instance_weights(&start, &joint)?;
    let entries: usize = (0..n).map(|i| start.grid.tuple_count(i)).sum();
    let mut lifter = Lifter {
        m: start,
        weights,
        values: &values,
        reserve: d.reserve_price()?,
        revenue: Rational::zero(),
        steps: vec![],
        cap: 2 * m.grid.instance_count() * entries,
    };
    lifter.revenue = lifter.revenue_of(&lifter.m);
    let initial_revenue = lifter.revenue.clone();

    let normalized = {
        let mut x = lifter.m.clone().with_tiebreak(TieBreak::HighestPayment).with_zero_profit_sales(true);
        x.clear_overrides();
        x
    };
    if normalized != lifter.m {
        let after = lifter.revenue_of(&normalized);
        if after < lifter.revenue {
            return Err(Error::Defect("normalizing the tie-break lowered revenue".into()));
        }
        lifter.steps.push(LiftStep {
            rule: LiftRule::Normalize,
            player: 0,
            opponents: vec![],
            changes: vec![],
            revenue_before: lifter.revenue.clone(),
            revenue_after: after.clone(),
        });
        lifter.m = normalized;
        lifter.revenue = after;
    }

    // off-grid prices move up to the next grid value, larger tuples first
    let mut off: Vec<(Vec<Rational>, usize, usize)> = vec![];
    for i in 0..n {
        for t in 0..lifter.m.grid.tuple_count(i) {
            if let Price::Finite(x) = lifter.m.grid.price(i, t) {
                if values.binary_search(x).is_err() {
                    off.push((sort_key(&lifter.m.grid, i, t), i, t));
                }
            }
        }
    }
    off.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    for (_, i, t) in off {
        let Price::Finite(x) = lifter.m.grid.price(i, t).clone() else { unreachable!() };
        let up = values.iter().find(|v| **v > x).cloned().map_or(Price::Never, Price::Finite);
        lifter.apply(LiftRule::SnapToGrid, i, t, vec![(i, t, up)])?;
    }

    while let Some((i, t)) = lifter.next_violation() {
        lifter.repair(i, t)?;
    }
    let r = Price::Finite(lifter.reserve.clone());
    for i in 0..n {
        for t in 0..lifter.m.grid.tuple_count(i) {
            let below = max_of(&lifter.m.grid.opponent_values(i, t)) < lifter.reserve;
            if below && lifter.m.grid.price(i, t) != &r {
                lifter.apply(LiftRule::BelowReserve, i, t, vec![(i, t, r.clone())])?;
            }
        }
    }
    if let Check::Fails(at) = is_truthful(&lifter.m) {
        return Err(Error::Defect(format!("lifted grid not truthful at {at:?}")));
    }
    let trace = LiftTrace {
        reserve: lifter.reserve.clone(),
        initial_revenue,
        final_revenue: lifter.revenue.clone(),
        steps: lifter.steps,
    };
    Ok((lifter.m, trace))
}

/// Checks, for entry `(i, t)` and a threshold at or above the reserve
/// where every other player loses money on `(z, v_{-i})` for all
/// `z >= threshold`, that lowering a price above the threshold by one
/// grid step does not lower revenue under iid values from `d`.
pub fn rev_max_price_check(
    m: &ProfitMaximizer,
    d: &DiscreteDistribution,
    i: usize,
    t: usize,
    threshold: &Rational,
) -> Result<bool> {
    let g = &m.grid;
    if i >= g.n() || t >= g.tuple_count(i) {
        return Err(Error::InvalidArgument("entry out of range".into()));
    }
    let values = d.values();
    if g.values(i) != values.as_slice() {
        return Err(Error::InvalidArgument("value set differs from the distribution's grid".into()));
    }
    let reserve = d.reserve_price()?;
    if *threshold < reserve {
        return Err(Error::HypothesisFails(format!(
            "threshold {threshold} is below the reserve {reserve}"
        )));
    }
    let k = d.index_of(threshold)?;
    for z in k..values.len() {
        let prof = g.with_own(i, t, z);
        for j in (0..g.n()).filter(|&j| j != i) {
            let tj = g.tuple_index(j, &prof);
            if g.price(j, tj).profit(&g.values(j)[prof[j]]).is_some_and(|p| !p.is_negative()) {
                return Err(Error::HypothesisFails(format!(
                    "player {} breaks even at {:?}",
                    j + 1,
                    g.values_of(&prof)
                )));
            }
        }
    }
    let lowered = match g.price(i, t) {
        Price::Finite(p) if p <= threshold => return Ok(true),
        Price::Never => values.last().expect("nonempty").clone(),
        Price::Finite(p) => {
            let pk = d.index_of(p)?;
            values[pk - 1].clone()
        }
    };
    let joint = product_joint(&vec![d.clone(); g.n()])?;
    let mut low = m.clone();
    low.grid.set_price(i, t, Price::Finite(lowered))?;
    let before = crate::mechanism::expected_revenue(m, &joint)?;
    let after = crate::mechanism::expected_revenue(&low, &joint)?;
    Ok(after >= before)
}

#[cfg(test)]
mod tests;
