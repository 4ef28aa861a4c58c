//! Seeded random instances for property tests, the acceptance suite and the
//! gap search.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::distributions::{Atom, DiscreteDistribution, JointDistribution};
use crate::mechanism::{AllocationTable, PaymentGrid, Price, ProfitMaximizer};
use crate::rational::Rational;

/// `{0, 1/(points-1), ..., 1}`; a single point gives `{0}`.
pub fn unit_grid(points: usize) -> Vec<Rational> {
    assert!(points >= 1);
    if points == 1 {
        return vec![Rational::zero()];
    }
    let m = (points - 1) as i64;
    (0..=m).map(|k| Rational::new(k, m)).collect()
}

/// Prices a random grid may use: the values, the values shifted by one step,
/// and `Never`.
pub fn price_pool(values: &[Rational]) -> Vec<Price> {
    let step = Rational::gcd_all(values).unwrap_or_else(Rational::one);
    let mut out: Vec<Rational> = values.to_vec();
    out.extend(values.iter().map(|v| v + &step));
    out.sort();
    out.dedup();
    let mut pool: Vec<Price> = out.into_iter().map(Price::Finite).collect();
    pool.push(Price::Never);
    pool
}

/// Uniformly random prices from [`price_pool`] over `n` copies of
/// [`unit_grid`].
pub fn random_grid(rng: &mut impl Rng, n: usize, points: usize) -> PaymentGrid {
    random_grid_over(rng, vec![unit_grid(points); n])
}

pub fn random_grid_over(rng: &mut impl Rng, values: Vec<Vec<Rational>>) -> PaymentGrid {
    let pools: Vec<Vec<Price>> = values.iter().map(|v| price_pool(v)).collect();
    PaymentGrid::from_fn(values, |i, _| pools[i].choose(rng).expect("nonempty").clone())
        .expect("valid random grid")
}

/// Rewrites prices of `m` one at a time with random pool entries, keeping
/// each change only when the allocation is unchanged.
pub fn perturb_keeping_allocation(rng: &mut impl Rng, m: &ProfitMaximizer, tries: usize) -> ProfitMaximizer {
    let table = m.allocation_table();
    let pools: Vec<Vec<Price>> = m.grid.value_sets().iter().map(|v| price_pool(v)).collect();
    let mut out = m.clone();
    for _ in 0..tries {
        let i = rng.gen_range(0..out.grid.n());
        let t = rng.gen_range(0..out.grid.tuple_count(i));
        let old = out.grid.price(i, t).clone();
        let new = pools[i].choose(rng).expect("nonempty").clone();
        out.grid.set_price(i, t, new).expect("pool prices are non-negative");
        if out.allocation_table() != table {
            out.grid.set_price(i, t, old).expect("restoring a valid price");
        }
    }
    out
}

/// Strictly positive masses with denominators at most `denom_cap` before
/// normalization.
pub fn random_distribution(rng: &mut impl Rng, points: usize, denom_cap: u32) -> DiscreteDistribution {
    let weights: Vec<Rational> = (0..points)
        .map(|_| Rational::int(rng.gen_range(1..=denom_cap.max(1)) as i64))
        .collect();
    DiscreteDistribution::from_weights(&weights).expect("positive weights")
}

/// A distribution with `f(v) >= f(v')/(1+f(v'))` for all `v >= v'`, by
/// rejection over nearly flat integer weights. Falls back to uniform.
pub fn random_mass_ratio_distribution(rng: &mut impl Rng, points: usize) -> DiscreteDistribution {
    for _ in 0..10_000 {
        let d = random_distribution_range(rng, points, 20, 40);
        if d.satisfies_mass_ratio_condition() {
            return d;
        }
    }
    DiscreteDistribution::uniform(points).expect("points >= 1")
}

fn random_distribution_range(rng: &mut impl Rng, points: usize, lo: i64, hi: i64) -> DiscreteDistribution {
    let weights: Vec<Rational> = (0..points)
        .map(|_| Rational::int(rng.gen_range(lo..=hi)))
        .collect();
    DiscreteDistribution::from_weights(&weights).expect("positive weights")
}

/// Joint over the cross product of `values`: a random denominator
/// `d <= denom_cap` and `d` unit weights dropped on uniformly chosen cells.
pub fn random_joint(rng: &mut impl Rng, values: &[Vec<Rational>], denom_cap: u32) -> JointDistribution {
    let cells: usize = values.iter().map(Vec::len).product();
    let d = rng.gen_range(1..=denom_cap.max(1));
    let mut counts = vec![0i64; cells];
    for _ in 0..d {
        counts[rng.gen_range(0..cells)] += 1;
    }
    let atoms = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(mut flat, &c)| {
            let mut profile = vec![Rational::zero(); values.len()];
            for i in (0..values.len()).rev() {
                profile[i] = values[i][flat % values[i].len()].clone();
                flat /= values[i].len();
            }
            Atom {
                profile,
                weight: Rational::new(c, d as i64),
            }
        })
        .collect();
    JointDistribution::new(values.len(), atoms).expect("weights sum to one")
}

/// Each instance gets no sale or a uniformly chosen winner.
pub fn random_allocation_table(rng: &mut impl Rng, values: Vec<Vec<Rational>>) -> AllocationTable {
    let n = values.len();
    AllocationTable::from_fn(values, |_| {
        let k = rng.gen_range(0..=n);
        (k < n).then_some(k)
    })
    .expect("valid table")
}

/// Random grid biased toward implementing `table`: each player's price
/// against a tuple is drawn from pool prices no higher than the smallest
/// value at which the table lets it win. Tuples where it never wins draw
/// from the whole pool.
pub fn random_grid_for_table(rng: &mut impl Rng, table: &AllocationTable) -> PaymentGrid {
    let values = table.values().to_vec();
    let mut grid = PaymentGrid::from_fn(values.clone(), |_, _| Price::Never).expect("valid table shape");
    for i in 0..grid.n() {
        let pool = price_pool(&values[i]);
        for t in 0..grid.tuple_count(i) {
            let lowest_win = (0..values[i].len()).find(|&own| table.winner(&grid.with_own(i, t, own)) == Some(i));
            let allowed: Vec<&Price> = match lowest_win {
                None => pool.iter().collect(),
                Some(k) => pool
                    .iter()
                    .filter(|p| p.finite().is_some_and(|x| *x <= values[i][k]))
                    .collect(),
            };
            let p = (*allowed.choose(rng).expect("pool contains 0")).clone();
            grid.set_price(i, t, p).expect("pool prices are non-negative");
        }
    }
    grid
}
