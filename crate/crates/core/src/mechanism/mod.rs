//! Payment grids and the profit-maximizer mechanisms they induce.

mod checks;
mod lattice;
mod revenue;

pub use checks::{
    check_alpha_moral, deviation, is_monotone_allocation, is_truthful, side_condition, Deviation,
    MonotonicityWitness, MoralityReport, Violation,
};
pub use lattice::{lattice_meet_join, rule_out_pattern, AllocationTable, RuleOutWitness};
pub use revenue::{dominance_check, expected_revenue, instance_weights};

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::Rational;

/// A potential payment: a non-negative price or the `Never` sentinel, which
/// orders above every finite price.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Price {
    Finite(Rational),
    Never,
}

impl Price {
    pub fn finite(&self) -> Option<&Rational> {
        match self {
            Price::Finite(p) => Some(p),
            Price::Never => None,
        }
    }

    /// Potential profit `v - p`, or `None` for `Never`.
    pub fn profit(&self, value: &Rational) -> Option<Rational> {
        self.finite().map(|p| value - p)
    }
}

impl From<Rational> for Price {
    fn from(p: Rational) -> Self {
        Price::Finite(p)
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Price::Finite(p) => write!(f, "{p}"),
            Price::Never => f.write_str("never"),
        }
    }
}

impl fmt::Debug for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl std::str::FromStr for Price {
    type Err = crate::rational::ParseRationalError;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.trim().eq_ignore_ascii_case("never") {
            Ok(Price::Never)
        } else {
            s.parse().map(Price::Finite)
        }
    }
}

impl Serialize for Price {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Price {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(i64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Int(n) => Ok(Price::Finite(Rational::int(n))),
        }
    }
}

/// How a profit maximizer picks among players tied at the maximal profit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    #[default]
    HighestPayment,
    LowestIndex,
    HighestValue,
}

/// Per-player value sets plus, for each player, a price for every tuple of
/// opponent values.
///
/// Opponent tuples are indexed in mixed radix over the other players' value
/// indices, earlier players most significant.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PaymentGrid {
    values: Vec<Vec<Rational>>,
    prices: Vec<Vec<Price>>,
}

impl PaymentGrid {
    pub fn new(values: Vec<Vec<Rational>>, prices: Vec<Vec<Price>>) -> Result<Self> {
        validate_value_sets(&values)?;
        if prices.len() != values.len() {
            return Err(Error::InvalidGrid(format!(
                "{} price tables for {} players",
                prices.len(),
                values.len()
            )));
        }
        let g = PaymentGrid { values, prices };
        for i in 0..g.n() {
            if g.prices[i].len() != g.tuple_count(i) {
                return Err(Error::InvalidGrid(format!(
                    "player {} has {} prices, expected {}",
                    i + 1,
                    g.prices[i].len(),
                    g.tuple_count(i)
                )));
            }
            if let Some(p) = g.prices[i].iter().filter_map(Price::finite).find(|p| p.is_negative()) {
                return Err(Error::InvalidGrid(format!("negative price {p}")));
            }
        }
        Ok(g)
    }

    /// Builds a grid by evaluating `price(i, opponent_values)` on every tuple.
    pub fn from_fn(
        values: Vec<Vec<Rational>>,
        mut price: impl FnMut(usize, &[Rational]) -> Price,
    ) -> Result<Self> {
        validate_value_sets(&values)?;
        let mut g = PaymentGrid {
            prices: vec![vec![]; values.len()],
            values,
        };
        for i in 0..g.n() {
            let table = (0..g.tuple_count(i))
                .map(|t| price(i, &g.opponent_values(i, t)))
                .collect();
            g.prices[i] = table;
        }
        PaymentGrid::new(g.values, g.prices)
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self, i: usize) -> &[Rational] {
        &self.values[i]
    }

    pub fn value_sets(&self) -> &[Vec<Rational>] {
        &self.values
    }

    pub fn prices(&self, i: usize) -> &[Price] {
        &self.prices[i]
    }

    pub fn price(&self, i: usize, t: usize) -> &Price {
        &self.prices[i][t]
    }

    pub fn set_price(&mut self, i: usize, t: usize, p: Price) -> Result<()> {
        if let Price::Finite(x) = &p {
            if x.is_negative() {
                return Err(Error::InvalidGrid(format!("negative price {x}")));
            }
        }
        self.prices[i][t] = p;
        Ok(())
    }

    pub fn instance_count(&self) -> usize {
        self.values.iter().map(Vec::len).product()
    }

    /// Stride of player `i` in the flat instance index (last player fastest).
    pub fn stride(&self, i: usize) -> usize {
        self.values[i + 1..].iter().map(Vec::len).product()
    }

    pub fn profile_of(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.n()];
        for i in (0..self.n()).rev() {
            let m = self.values[i].len();
            out[i] = flat % m;
            flat /= m;
        }
        out
    }

    pub fn flat_of(&self, profile: &[usize]) -> usize {
        profile
            .iter()
            .zip(&self.values)
            .fold(0, |acc, (&k, vs)| acc * vs.len() + k)
    }

    pub fn tuple_count(&self, i: usize) -> usize {
        self.values
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != i)
            .map(|(_, v)| v.len())
            .product()
    }

    /// Tuple index of the opponents of `i` in a full profile of indices.
    pub fn tuple_index(&self, i: usize, profile: &[usize]) -> usize {
        profile
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != i)
            .fold(0, |acc, (k, &x)| acc * self.values[k].len() + x)
    }

    /// Opponent value indices (in player order, skipping `i`) of tuple `t`.
    pub fn tuple_profile(&self, i: usize, mut t: usize) -> Vec<usize> {
        let others: Vec<usize> = (0..self.n()).filter(|&k| k != i).collect();
        let mut out = vec![0; others.len()];
        for (pos, &k) in others.iter().enumerate().rev() {
            let m = self.values[k].len();
            out[pos] = t % m;
            t /= m;
        }
        out
    }

    pub fn opponent_values(&self, i: usize, t: usize) -> Vec<Rational> {
        let others = (0..self.n()).filter(|&k| k != i);
        others
            .zip(self.tuple_profile(i, t))
            .map(|(k, x)| self.values[k][x].clone())
            .collect()
    }

    /// Full index profile obtained by inserting `own` for player `i` into
    /// opponent tuple `t`.
    pub fn with_own(&self, i: usize, t: usize, own: usize) -> Vec<usize> {
        let mut p = self.tuple_profile(i, t);
        p.insert(i, own);
        p
    }

    pub fn index_of_value(&self, i: usize, v: &Rational) -> Result<usize> {
        self.values[i]
            .binary_search(v)
            .map_err(|_| Error::off_grid(v, format!("value set of player {}", i + 1)))
    }

    pub fn indices_of(&self, profile: &[Rational]) -> Result<Vec<usize>> {
        if profile.len() != self.n() {
            return Err(Error::InvalidArgument(format!(
                "profile has {} entries for {} players",
                profile.len(),
                self.n()
            )));
        }
        profile
            .iter()
            .enumerate()
            .map(|(i, v)| self.index_of_value(i, v))
            .collect()
    }

    pub fn values_of(&self, profile: &[usize]) -> Vec<Rational> {
        profile
            .iter()
            .enumerate()
            .map(|(i, &k)| self.values[i][k].clone())
            .collect()
    }

    /// Prices faced by each player at an index profile.
    pub fn prices_at(&self, profile: &[usize]) -> Vec<&Price> {
        (0..self.n())
            .map(|i| &self.prices[i][self.tuple_index(i, profile)])
            .collect()
    }

    /// Pointwise combination of two grids over identical value sets.
    pub fn zip_with(&self, other: &PaymentGrid, f: impl Fn(&Price, &Price) -> Price) -> Result<Self> {
        if self.values != other.values {
            return Err(Error::InvalidArgument("grids have different value sets".into()));
        }
        let prices = self
            .prices
            .iter()
            .zip(&other.prices)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| f(x, y)).collect())
            .collect();
        PaymentGrid::new(self.values.clone(), prices)
    }
}

fn validate_value_sets(values: &[Vec<Rational>]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidGrid("no players".into()));
    }
    for (i, vs) in values.iter().enumerate() {
        if vs.is_empty() {
            return Err(Error::InvalidGrid(format!("player {} has no values", i + 1)));
        }
        if vs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid(format!(
                "values of player {} must be strictly increasing",
                i + 1
            )));
        }
        if vs[0].is_negative() {
            return Err(Error::InvalidGrid(format!("negative value {}", vs[0])));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Outcome {
    pub winner: Option<usize>,
    pub payment: Rational,
}

impl Outcome {
    pub fn no_sale() -> Self {
        Outcome {
            winner: None,
            payment: Rational::zero(),
        }
    }

    /// Realized profit of player `k` whose true value is `value`.
    pub fn utility(&self, k: usize, value: &Rational) -> Rational {
        if self.winner == Some(k) {
            value - &self.payment
        } else {
            Rational::zero()
        }
    }
}

/// Picks the winner among players given their values and potential
/// payments: the maximal potential profit wins when it is positive, or when
/// it is zero and `sell_at_zero` is set; ties follow `tiebreak`.
pub fn select_winner(
    values: &[Rational],
    prices: &[&Price],
    tiebreak: TieBreak,
    sell_at_zero: bool,
) -> Option<usize> {
    let tied = tied_maximizers(values, prices, sell_at_zero);
    tied.into_iter().reduce(|best, k| {
        let better = match tiebreak {
            TieBreak::LowestIndex => false,
            TieBreak::HighestPayment => prices[k] > prices[best],
            TieBreak::HighestValue => values[k] > values[best],
        };
        if better {
            k
        } else {
            best
        }
    })
}

/// Players sharing the maximal potential profit, if that profit qualifies
/// for a sale; ascending by index.
pub fn tied_maximizers(values: &[Rational], prices: &[&Price], sell_at_zero: bool) -> Vec<usize> {
    let mut best: Option<Rational> = None;
    let mut tied = vec![];
    for (k, (v, p)) in values.iter().zip(prices).enumerate() {
        let Some(profit) = p.profit(v) else { continue };
        match best.as_ref().map(|b| profit.cmp(b)) {
            None | Some(Ordering::Greater) => {
                best = Some(profit);
                tied = vec![k];
            }
            Some(Ordering::Equal) => tied.push(k),
            Some(Ordering::Less) => {}
        }
    }
    match best {
        Some(b) if b.is_positive() || (b.is_zero() && sell_at_zero) => tied,
        _ => vec![],
    }
}

/// A payment grid run as an alpha-profit maximizer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProfitMaximizer {
    pub grid: PaymentGrid,
    pub alpha: Rational,
    pub tiebreak: TieBreak,
    pub sell_at_zero_profit: bool,
    /// Per-instance winner choices among tied maximal-profit players, keyed
    /// by index profile. `None` declines a zero-profit sale.
    overrides: BTreeMap<Vec<usize>, Option<usize>>,
}

impl ProfitMaximizer {
    pub fn new(grid: PaymentGrid, alpha: Rational) -> Self {
        ProfitMaximizer {
            grid,
            alpha,
            tiebreak: TieBreak::default(),
            sell_at_zero_profit: true,
            overrides: BTreeMap::new(),
        }
    }

    pub fn with_tiebreak(mut self, tiebreak: TieBreak) -> Self {
        self.tiebreak = tiebreak;
        self
    }

    pub fn with_zero_profit_sales(mut self, on: bool) -> Self {
        self.sell_at_zero_profit = on;
        self
    }

    pub fn overrides(&self) -> &BTreeMap<Vec<usize>, Option<usize>> {
        &self.overrides
    }

    pub fn clear_overrides(&mut self) {
        self.overrides.clear();
    }

    /// Fixes the winner at one instance. The chosen player must be among the
    /// tied maximal-profit players; declining a sale is allowed only when
    /// the maximal profit is exactly zero.
    pub fn set_override(&mut self, profile: &[usize], winner: Option<usize>) -> Result<()> {
        let values = self.grid.values_of(profile);
        let prices = self.grid.prices_at(profile);
        let tied = tied_maximizers(&values, &prices, true);
        let ok = match winner {
            Some(w) => tied.contains(&w),
            None => {
                tied.is_empty()
                    || tied
                        .iter()
                        .all(|&k| prices[k].profit(&values[k]).is_some_and(|p| p.is_zero()))
            }
        };
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "winner {:?} at instance {:?} is not a maximal-profit choice",
                winner.map(|w| w + 1),
                values
            )));
        }
        let default = self.allocate_default(profile).winner;
        if default == winner {
            self.overrides.remove(profile);
        } else {
            self.overrides.insert(profile.to_vec(), winner);
        }
        Ok(())
    }

    fn allocate_default(&self, profile: &[usize]) -> Outcome {
        let values = self.grid.values_of(profile);
        let prices = self.grid.prices_at(profile);
        let winner = select_winner(&values, &prices, self.tiebreak, self.sell_at_zero_profit);
        outcome_for(winner, &prices)
    }

    /// Outcome at a profile of value indices.
    pub fn allocate_indices(&self, profile: &[usize]) -> Outcome {
        if let Some(w) = self.overrides.get(profile) {
            let prices = self.grid.prices_at(profile);
            return outcome_for(*w, &prices);
        }
        self.allocate_default(profile)
    }

    /// Outcome at a profile of values.
    pub fn allocate(&self, profile: &[Rational]) -> Result<Outcome> {
        let idx = self.grid.indices_of(profile)?;
        Ok(self.allocate_indices(&idx))
    }

    /// Outcomes for every instance, in flat-index order.
    pub fn outcomes(&self) -> Vec<Outcome> {
        (0..self.grid.instance_count())
            .map(|f| self.allocate_indices(&self.grid.profile_of(f)))
            .collect()
    }

    pub fn allocation_table(&self) -> AllocationTable {
        AllocationTable::new(
            self.grid.value_sets().to_vec(),
            self.outcomes().into_iter().map(|o| o.winner).collect(),
        )
        .expect("sizes agree")
    }

    /// Same outcomes, with every finite price that its player can never win
    /// at replaced by `Never`.
    pub fn normalized(&self) -> ProfitMaximizer {
        let g = &self.grid;
        let outcomes = self.outcomes();
        let mut out = self.clone();
        for i in 0..g.n() {
            for t in 0..g.tuple_count(i) {
                if g.price(i, t) == &Price::Never {
                    continue;
                }
                let wins = (0..g.values(i).len())
                    .any(|own| outcomes[g.flat_of(&g.with_own(i, t, own))].winner == Some(i));
                if !wins {
                    out.grid.prices[i][t] = Price::Never;
                }
            }
        }
        debug_assert_eq!(out.outcomes(), outcomes);
        out
    }
}

fn outcome_for(winner: Option<usize>, prices: &[&Price]) -> Outcome {
    match winner {
        Some(w) => Outcome {
            winner: Some(w),
            payment: prices[w]
                .finite()
                .cloned()
                .expect("winner has a finite price"),
        },
        None => Outcome::no_sale(),
    }
}
