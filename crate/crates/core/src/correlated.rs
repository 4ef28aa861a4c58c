//! Correlated values: the lookahead auction, the moralize transform, the
//! two-approximation check, a seeded search for instances where moral
//! grids out-earn truthful ones, and a property validator for externally
//! supplied two-player instances.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::{best_take_it_or_leave_it, JointDistribution};
use crate::error::{Error, Result};
use crate::mechanism::{check_alpha_moral, expected_revenue, is_truthful, PaymentGrid, Price, ProfitMaximizer};
use crate::rational::Rational;
use crate::sampling::{random_joint, unit_grid};
use crate::search::{brute_force_optimal, Mode, SearchOptions, SearchResult, SearchSpace, Secondary};
use crate::Check;

#[derive(Clone, Debug, Serialize)]
pub struct Lookahead {
    #[serde(skip)]
    pub mechanism: ProfitMaximizer,
    pub revenue: Rational,
}

/// Lookahead auction over the joint's supports: against each opponent
/// tuple, a player is offered the best take-it-or-leave-it price for its
/// value conditioned on those opponents and on being the designated
/// highest bidder (ties to the lowest index). Tuples with no such
/// conditional mass get `Never`.
pub fn lookahead(j: &JointDistribution) -> Result<Lookahead> {
    let values = j.supports();
    let mut err = None;
    let grid = PaymentGrid::from_fn(values, |i, opp| match j.conditional_top_given(i, opp) {
        Ok(marginal) => match best_take_it_or_leave_it(&marginal) {
            Ok((p, _)) => Price::Finite(p),
            Err(e) => {
                err.get_or_insert(e);
                Price::Never
            }
        },
        Err(Error::EmptyCondition) => Price::Never,
        Err(e) => {
            err.get_or_insert(e);
            Price::Never
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    let mechanism = ProfitMaximizer::new(grid, Rational::zero());
    if let Check::Fails(at) = is_truthful(&mechanism) {
        return Err(Error::Defect(format!("lookahead grid not truthful at {at:?}")));
    }
    let revenue = expected_revenue(&mechanism, j)?;
    Ok(Lookahead { mechanism, revenue })
}

/// Two-player transform: player 1's prices drop by `shift` (floored at 0)
/// and player 2 always faces `base_price`. The result is run at alpha = 1;
/// its morality at any alpha must be checked separately.
pub fn moralize_transform(m: &ProfitMaximizer, shift: &Rational, base_price: &Price) -> Result<ProfitMaximizer> {
    if m.grid.n() != 2 {
        return Err(Error::InvalidArgument("moralize transform needs exactly two players".into()));
    }
    if shift.is_negative() {
        return Err(Error::InvalidArgument(format!("negative shift {shift}")));
    }
    if !is_truthful(m).holds() {
        return Err(Error::NotTruthfulInput);
    }
    let g = &m.grid;
    let first = g
        .prices(0)
        .iter()
        .map(|p| match p {
            Price::Finite(x) => Price::Finite((x - shift).max(Rational::zero())),
            Price::Never => Price::Never,
        })
        .collect();
    let second = vec![base_price.clone(); g.tuple_count(1)];
    let grid = PaymentGrid::new(g.value_sets().to_vec(), vec![first, second])?;
    Ok(ProfitMaximizer::new(grid, Rational::one()).with_tiebreak(m.tiebreak))
}

#[derive(Clone, Debug, Serialize)]
pub struct TwoApprox {
    pub lookahead_revenue: Rational,
    pub optimal_moral_revenue: Rational,
    /// 1 when the optimal moral revenue is 0.
    pub ratio: Rational,
    pub passes: bool,
}

fn quick(opts: &SearchOptions) -> SearchOptions {
    SearchOptions {
        lex_smallest: false,
        ..opts.clone()
    }
}

/// Lookahead revenue against the optimal `alpha`-moral revenue over the
/// joint's supports; passes when the ratio is at least 1/2.
pub fn two_approx_check(j: &JointDistribution, alpha: &Rational, opts: &SearchOptions) -> Result<TwoApprox> {
    let la = lookahead(j)?;
    let space = SearchSpace::new(j.supports(), Mode::Moral, alpha.clone())?;
    let best = brute_force_optimal(&space, j, &quick(opts))?.best_revenue;
    let ratio = if best.is_zero() {
        Rational::one()
    } else {
        &la.revenue / &best
    };
    if la.revenue > best {
        return Err(Error::Defect("lookahead beats the moral optimum".into()));
    }
    Ok(TwoApprox {
        passes: ratio >= Rational::new(1, 2),
        lookahead_revenue: la.revenue,
        optimal_moral_revenue: best,
        ratio,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GapConfig {
    /// Values per player, on the unit grid.
    pub support: usize,
    pub denom_cap: u32,
    pub samples: u64,
    pub seed: u64,
}

impl Default for GapConfig {
    fn default() -> Self {
        GapConfig {
            support: 3,
            denom_cap: 12,
            samples: 10_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GapInstance {
    pub sample: u64,
    pub gap: Rational,
    pub moral_revenue: Rational,
    pub truthful_revenue: Rational,
    pub joint: JointDistribution,
    #[serde(skip)]
    pub moral: SearchResult,
    #[serde(skip)]
    pub truthful: SearchResult,
}

#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub config: GapConfig,
    pub samples_with_gap: u64,
    pub best: GapInstance,
}

/// The joint drawn for sample `idx`: stream `idx` of a ChaCha8 generator
/// seeded with `seed`.
pub fn gap_sample(config: &GapConfig, idx: u64) -> JointDistribution {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(idx);
    let v = unit_grid(config.support);
    random_joint(&mut rng, &[v.clone(), v], config.denom_cap)
}

fn gap_of(j: &JointDistribution, opts: &SearchOptions) -> Result<(Rational, SearchResult, SearchResult)> {
    let values = j.supports();
    let moral = brute_force_optimal(&SearchSpace::new(values.clone(), Mode::Moral, Rational::one())?, j, opts)?;
    let truthful = brute_force_optimal(&SearchSpace::new(values, Mode::Truthful, Rational::zero())?, j, opts)?;
    if moral.best_revenue < truthful.best_revenue {
        return Err(Error::Defect("moral optimum below truthful optimum".into()));
    }
    Ok((&moral.best_revenue - &truthful.best_revenue, moral, truthful))
}

/// Optimal 1-moral minus optimal truthful revenue over seeded two-player
/// joints; the largest gap wins, ties to the lowest sample index. The
/// reported grids are the lexicographically smallest optima.
pub fn gap_search(config: &GapConfig, opts: &SearchOptions) -> Result<GapReport> {
    if config.samples == 0 {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let fast = quick(opts);
    let gaps: Vec<Rational> = crate::search::with_threads(opts.threads, || {
        (0..config.samples)
            .into_par_iter()
            .map(|idx| gap_of(&gap_sample(config, idx), &fast).map(|(g, _, _)| g))
            .collect::<Result<Vec<_>>>()
    })??;
    let mut best = 0;
    for (k, g) in gaps.iter().enumerate() {
        if *g > gaps[best] {
            best = k;
        }
    }
    let samples_with_gap = gaps.iter().filter(|g| g.is_positive()).count() as u64;
    let joint = gap_sample(config, best as u64);
    let (gap, moral, truthful) = gap_of(&joint, opts)?;
    Ok(GapReport {
        config: config.clone(),
        samples_with_gap,
        best: GapInstance {
            sample: best as u64,
            gap,
            moral_revenue: moral.best_revenue.clone(),
            truthful_revenue: truthful.best_revenue.clone(),
            joint,
            moral,
            truthful,
        },
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", content = "detail", rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails(String),
    Unverifiable(String),
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds)
    }
}

/// Bounds `lo < e < hi` from the Taylor series with 21 terms.
pub fn e_bounds() -> (Rational, Rational) {
    let mut term = Rational::one();
    let mut sum = Rational::one();
    for k in 1..=20 {
        term = term / Rational::int(k);
        sum += &term;
    }
    // remainder after the k = 20 term is below term / 20
    let hi = &sum + &term / Rational::int(20);
    (sum, hi)
}

/// `e/(e-1)` bounded with [`e_bounds`] (decreasing in `e`).
fn e_ratio_bounds() -> (Rational, Rational) {
    let (lo, hi) = e_bounds();
    let f = |e: &Rational| e / &(e - Rational::one());
    (f(&hi), f(&lo))
}

/// `1/(e-1)` bounded likewise.
fn inv_e_minus_one_bounds() -> (Rational, Rational) {
    let (lo, hi) = e_bounds();
    let f = |e: &Rational| (e - Rational::one()).recip();
    (f(&hi), f(&lo))
}

/// `x >= [lo, hi]`: holds above `hi`, fails below `lo`, undecided between.
fn at_least(x: &Rational, lo: &Rational, hi: &Rational, what: &str) -> Verdict {
    if x >= hi {
        Verdict::Holds
    } else if x < lo {
        Verdict::Fails(format!("{what}: {x} < {lo}"))
    } else {
        Verdict::Unverifiable(format!("{what}: {x} within e-bounds [{lo}, {hi}]"))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HPropertyReport {
    pub finite_support: Verdict,
    pub values_at_least_one: Verdict,
    pub player1_separation: Verdict,
    pub player2_band: Verdict,
    pub truthful_revenue_bound: Verdict,
    pub player2_never_optimal: Verdict,
    pub optimal_truthful_revenue: Option<Rational>,
    pub no_sale_probability: Option<Rational>,
}

impl HPropertyReport {
    pub fn all_hold(&self) -> bool {
        [
            &self.finite_support,
            &self.values_at_least_one,
            &self.player1_separation,
            &self.player2_band,
            &self.truthful_revenue_bound,
            &self.player2_never_optimal,
        ]
        .iter()
        .all(|v| v.holds())
    }
}

struct HSearch {
    truthful: SearchResult,
    /// Optimum with player 2 never served, maximizing the no-sale
    /// probability as a secondary objective.
    player1_only: SearchResult,
}

fn h_search(j: &JointDistribution, opts: &SearchOptions) -> Result<HSearch> {
    let values = j.supports();
    let truthful = brute_force_optimal(&SearchSpace::new(values.clone(), Mode::Truthful, Rational::zero())?, j, opts)?;
    let space = SearchSpace::new(values, Mode::Truthful, Rational::zero())?.force_player(1, Price::Never);
    let opts1 = SearchOptions {
        secondary: Secondary::NoSaleProbability,
        ..opts.clone()
    };
    let player1_only = brute_force_optimal(&space, j, &opts1)?;
    Ok(HSearch { truthful, player1_only })
}

/// Decides each of the six two-player instance properties by enumeration.
/// The two revenue properties need exhaustive searches and are reported
/// unverifiable when those exceed the cap.
pub fn validate_h_properties(
    j: &JointDistribution,
    alpha: &Rational,
    eps: &Rational,
    delta: &Rational,
    opts: &SearchOptions,
) -> Result<HPropertyReport> {
    if j.n() != 2 {
        return Err(Error::InvalidArgument("instance must have two players".into()));
    }
    let one = Rational::one();
    let finite_support = if j.atoms().is_empty() {
        Verdict::Fails("no atoms".into())
    } else {
        Verdict::Holds
    };
    let values_at_least_one = match j.atoms().iter().find(|a| a.profile.iter().any(|v| *v < one)) {
        Some(a) => Verdict::Fails(format!("atom {}", crate::io::fmt_profile(&a.profile))),
        None => Verdict::Holds,
    };
    let s1 = j.support(0);
    let player1_separation = match s1.windows(2).find(|w| &w[1] - &w[0] <= *eps) {
        Some(w) => Verdict::Fails(format!("values {} and {} are within {eps}", w[0], w[1])),
        None => Verdict::Holds,
    };
    let band_top = &one + eps * alpha;
    let player2_band = match j.support(1).into_iter().find(|v| *v < one || *v > band_top) {
        Some(v) => Verdict::Fails(format!("player 2 value {v} outside [1, {band_top}]")),
        None => Verdict::Holds,
    };
    let (truthful_revenue_bound, player2_never_optimal, optimal_truthful_revenue, no_sale_probability) =
        match h_search(j, &quick(opts)) {
            Ok(h) => {
                let rev = h.truthful.best_revenue.clone();
                let (lo, hi) = e_ratio_bounds();
                let bound = if rev <= &lo + delta {
                    Verdict::Holds
                } else if rev > &hi + delta {
                    Verdict::Fails(format!("optimal truthful revenue {rev} exceeds {}", &hi + delta))
                } else {
                    Verdict::Unverifiable(format!("optimal truthful revenue {rev} within e-bounds of the limit"))
                };
                let no_sale = h.player1_only.best_secondary.clone().unwrap_or_default();
                let never = if h.player1_only.best_revenue != rev {
                    Verdict::Fails(format!(
                        "best revenue without player 2 is {} < {rev}",
                        h.player1_only.best_revenue
                    ))
                } else {
                    let (lo, hi) = inv_e_minus_one_bounds();
                    at_least(&no_sale, &lo, &hi, "no-sale probability")
                };
                (bound, never, Some(rev), Some(no_sale))
            }
            Err(Error::SpaceTooLarge { work, cap }) => {
                let why = format!("search work {work} exceeds cap {cap}");
                (Verdict::Unverifiable(why.clone()), Verdict::Unverifiable(why), None, None)
            }
            Err(e) => return Err(e),
        };
    Ok(HPropertyReport {
        finite_support,
        values_at_least_one,
        player1_separation,
        player2_band,
        truthful_revenue_bound,
        player2_never_optimal,
        optimal_truthful_revenue,
        no_sale_probability,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MoralizeGain {
    pub truthful_revenue: Rational,
    pub moralized_revenue: Rational,
    pub gain: Rational,
    /// The required gain `(1 - eps)/(e - 1) - eps (e/(e-1) + delta)`,
    /// bracketed by the bounds on `e`.
    pub required_lo: Rational,
    pub required_hi: Rational,
    pub verdict: Verdict,
    pub moralized_is_moral: bool,
}

/// Applies the moralize transform (shift `eps`, player 2 at price 1) to the
/// optimal truthful grid that never serves player 2, and compares the
/// revenue gain with the required amount.
pub fn moralize_gain(
    j: &JointDistribution,
    alpha: &Rational,
    eps: &Rational,
    delta: &Rational,
    opts: &SearchOptions,
) -> Result<MoralizeGain> {
    let h = h_search(j, opts)?;
    let base = ProfitMaximizer::new(h.player1_only.best_grid.clone(), Rational::zero());
    let moralized = moralize_transform(&base, eps, &Price::Finite(Rational::one()))?;
    let truthful_revenue = h.truthful.best_revenue.clone();
    let moralized_revenue = expected_revenue(&moralized, j)?;
    let gain = &moralized_revenue - &truthful_revenue;
    let (inv_lo, inv_hi) = inv_e_minus_one_bounds();
    let (r_lo, r_hi) = e_ratio_bounds();
    let one = Rational::one();
    let required_lo = &inv_lo * &(&one - eps) - eps * &(&r_hi + delta);
    let required_hi = &inv_hi * &(&one - eps) - eps * &(&r_lo + delta);
    Ok(MoralizeGain {
        verdict: at_least(&gain, &required_lo, &required_hi, "gain"),
        moralized_is_moral: check_alpha_moral(&moralized, alpha).moral,
        truthful_revenue,
        moralized_revenue,
        gain,
        required_lo,
        required_hi,
    })
}

#[cfg(test)]
mod tests;
