//! Discrete value distributions on `{0, eps, 2 eps, ..., 1}` and finite joint
//! distributions over value profiles.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::Check;

/// Default cap on the number of atoms produced by [`product_joint`].
pub const DEFAULT_ATOM_CAP: u128 = 10_000_000;

/// Rational stand-in for `e` used by [`DiscreteDistribution::exponential`].
pub fn default_e() -> Rational {
    Rational::new(2721, 1001)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DistributionFile", into = "DistributionFile")]
pub struct DiscreteDistribution {
    eps: Rational,
    mass: Vec<Rational>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistributionFile {
    eps: Rational,
    mass: Vec<Rational>,
}

impl TryFrom<DistributionFile> for DiscreteDistribution {
    type Error = Error;
    fn try_from(f: DistributionFile) -> Result<Self> {
        DiscreteDistribution::new(f.eps, f.mass)
    }
}

impl From<DiscreteDistribution> for DistributionFile {
    fn from(d: DiscreteDistribution) -> Self {
        DistributionFile {
            eps: d.eps,
            mass: d.mass,
        }
    }
}

impl DiscreteDistribution {
    pub fn new(eps: Rational, mass: Vec<Rational>) -> Result<Self> {
        if !eps.is_positive() {
            return Err(Error::InvalidDistribution("eps must be positive".into()));
        }
        let steps = eps.recip();
        if !steps.is_integer() {
            return Err(Error::InvalidDistribution(format!(
                "1/eps must be an integer, got eps = {eps}"
            )));
        }
        let expected = steps.to_i64().unwrap_or(i64::MAX).saturating_add(1);
        if mass.len() as i64 != expected {
            return Err(Error::InvalidDistribution(format!(
                "expected {expected} masses for eps = {eps}, got {}",
                mass.len()
            )));
        }
        if let Some(m) = mass.iter().find(|m| m.is_negative()) {
            return Err(Error::InvalidDistribution(format!("negative mass {m}")));
        }
        let total: Rational = mass.iter().sum();
        if total != Rational::one() {
            return Err(Error::InvalidDistribution(format!(
                "masses sum to {total}, not 1"
            )));
        }
        Ok(DiscreteDistribution { eps, mass })
    }

    /// Uniform on `points` equally spaced values `0, 1/(points-1), ..., 1`.
    pub fn uniform(points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::InvalidDistribution(
                "a grid needs at least two points".into(),
            ));
        }
        let eps = Rational::new(1, points as i64 - 1);
        let m = Rational::new(1, points as i64);
        DiscreteDistribution::new(eps, vec![m; points])
    }

    /// Discretized exponential: mass at `k eps` proportional to `e^{-k}`,
    /// with `e` replaced by the rational `e_approx` and renormalized.
    pub fn exponential(points: usize, e_approx: &Rational) -> Result<Self> {
        if points < 2 {
            return Err(Error::InvalidDistribution(
                "a grid needs at least two points".into(),
            ));
        }
        let r = e_approx.recip();
        let raw: Vec<Rational> = (0..points).map(|k| r.pow(k as u32)).collect();
        let total: Rational = raw.iter().sum();
        let mass = raw.into_iter().map(|w| w / &total).collect();
        DiscreteDistribution::new(Rational::new(1, points as i64 - 1), mass)
    }

    /// Builds a distribution on `weights.len()` points from unnormalized
    /// non-negative weights.
    pub fn from_weights(weights: &[Rational]) -> Result<Self> {
        let total: Rational = weights.iter().sum();
        if !total.is_positive() || weights.len() < 2 {
            return Err(Error::InvalidDistribution("need positive total weight".into()));
        }
        let mass = weights.iter().map(|w| w / &total).collect();
        DiscreteDistribution::new(Rational::new(1, weights.len() as i64 - 1), mass)
    }

    pub fn eps(&self) -> &Rational {
        &self.eps
    }

    pub fn masses(&self) -> &[Rational] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn value(&self, k: usize) -> Rational {
        Rational::int(k as i64) * &self.eps
    }

    pub fn values(&self) -> Vec<Rational> {
        (0..self.len()).map(|k| self.value(k)).collect()
    }

    pub fn top(&self) -> Rational {
        self.value(self.len() - 1)
    }

    pub fn index_of(&self, v: &Rational) -> Result<usize> {
        let k = v / &self.eps;
        match k.to_i64() {
            Some(k) if k >= 0 && (k as usize) < self.len() => Ok(k as usize),
            _ => Err(Error::off_grid(v, format!("grid step {}", self.eps))),
        }
    }

    pub fn pmf(&self, k: usize) -> &Rational {
        &self.mass[k]
    }

    /// `F(v_k)`, inclusive of `v_k`.
    pub fn cdf(&self, k: usize) -> Rational {
        self.mass[..=k].iter().sum()
    }

    /// `1 - F(v_k)`.
    pub fn tail_above(&self, k: usize) -> Rational {
        self.mass[k + 1..].iter().sum()
    }

    pub fn phi_at(&self, k: usize) -> Result<Rational> {
        let f = &self.mass[k];
        if f.is_zero() {
            return Err(Error::ZeroDensity {
                value: self.value(k),
            });
        }
        Ok(self.value(k) - &self.eps * self.tail_above(k) / f)
    }

    pub fn virtual_value(&self, v: &Rational) -> Result<Rational> {
        self.phi_at(self.index_of(v)?)
    }

    pub fn virtual_values(&self) -> Result<Vec<Rational>> {
        (0..self.len()).map(|k| self.phi_at(k)).collect()
    }

    /// Checks that the virtual value is non-decreasing; the witness is the
    /// first consecutive pair `(v, v + eps)` where it drops.
    pub fn is_regular(&self) -> Result<Check<(Rational, Rational)>> {
        let phi = self.virtual_values()?;
        for k in 1..phi.len() {
            if phi[k - 1] > phi[k] {
                return Ok(Check::Fails((self.value(k - 1), self.value(k))));
            }
        }
        Ok(Check::Holds)
    }

    /// Checks `v - eps(1-F(v))/f(v) >= v' - eps(1-F(v))/f(v')` for every
    /// `v > v'`. Witness is `(v, v')`.
    pub fn is_standard(&self) -> Result<Check<(Rational, Rational)>> {
        for k in 0..self.len() {
            if self.mass[k].is_zero() {
                return Err(Error::ZeroDensity {
                    value: self.value(k),
                });
            }
        }
        for hi in 1..self.len() {
            let tail = self.tail_above(hi);
            let lhs = self.value(hi) - &self.eps * &tail / &self.mass[hi];
            for lo in 0..hi {
                let rhs = self.value(lo) - &self.eps * &tail / &self.mass[lo];
                if lhs < rhs {
                    return Ok(Check::Fails((self.value(hi), self.value(lo))));
                }
            }
        }
        Ok(Check::Holds)
    }

    /// `f(v) >= f(v') / (1 + f(v'))` for all `v >= v'`, a sufficient
    /// condition for standardness.
    pub fn satisfies_mass_ratio_condition(&self) -> bool {
        (0..self.len()).all(|lo| {
            let bound = &self.mass[lo] / (Rational::one() + &self.mass[lo]);
            (lo..self.len()).all(|hi| self.mass[hi] >= bound)
        })
    }

    /// Revenue of posting price `v_k` to a single bidder: `v_k (1 - F(v_k - eps))`.
    pub fn posted_price_revenue(&self, k: usize) -> Rational {
        let at_least: Rational = self.mass[k..].iter().sum();
        self.value(k) * at_least
    }

    fn require_regular(&self) -> Result<Vec<Rational>> {
        if let Check::Fails((lo, hi)) = self.is_regular()? {
            return Err(Error::NotRegular { lo: Box::new(lo), hi: Box::new(hi) });
        }
        self.virtual_values()
    }

    /// The largest grid value whose virtual value is `<= 0`.
    ///
    /// The posted-price revenue curve satisfies
    /// `R(v + eps) - R(v) = -f(v) phi(v)`, so its maximizers are this value
    /// (only when its virtual value is exactly zero) and the next grid
    /// point. That relation is asserted here.
    pub fn monopolist_price(&self) -> Result<Rational> {
        let phi = self.require_regular()?;
        let x = phi.iter().rposition(|p| !p.is_positive()).unwrap_or(0);
        let argmax = self.revenue_argmax();
        let consistent = argmax.last() == Some(&(x + 1))
            && argmax.contains(&x) == phi[x].is_zero();
        if !consistent {
            return Err(Error::Defect(format!(
                "revenue argmax {argmax:?} inconsistent with monopolist index {x}"
            )));
        }
        Ok(self.value(x))
    }

    /// The smallest revenue-maximizing posted price, equivalently the
    /// smallest grid value with non-negative virtual value.
    pub fn reserve_price(&self) -> Result<Rational> {
        let phi = self.require_regular()?;
        let r = phi
            .iter()
            .position(|p| !p.is_negative())
            .ok_or_else(|| Error::Defect("virtual value negative at the top".into()))?;
        let argmax = self.revenue_argmax();
        if argmax.first() != Some(&r) {
            return Err(Error::Defect(format!(
                "smallest revenue maximizer {argmax:?} differs from reserve index {r}"
            )));
        }
        Ok(self.value(r))
    }

    fn revenue_argmax(&self) -> Vec<usize> {
        let rev: Vec<Rational> = (0..self.len())
            .map(|k| self.posted_price_revenue(k))
            .collect();
        let best = rev.iter().max().cloned().unwrap_or_default();
        (0..self.len()).filter(|&k| rev[k] == best).collect()
    }

    /// Smallest grid value `v` with `phi(v) >= target`.
    pub fn phi_inverse(&self, target: &Rational) -> Result<Rational> {
        let phi = self.require_regular()?;
        phi.iter()
            .position(|p| p >= target)
            .map(|k| self.value(k))
            .ok_or_else(|| Error::NoPreimage {
                target: target.clone(),
            })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub profile: Vec<Rational>,
    pub weight: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "JointFile", into = "JointFile")]
pub struct JointDistribution {
    n: usize,
    atoms: Vec<Atom>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointFile {
    n: usize,
    atoms: Vec<Atom>,
}

impl TryFrom<JointFile> for JointDistribution {
    type Error = Error;
    fn try_from(f: JointFile) -> Result<Self> {
        JointDistribution::new(f.n, f.atoms)
    }
}

impl From<JointDistribution> for JointFile {
    fn from(j: JointDistribution) -> Self {
        JointFile {
            n: j.n,
            atoms: j.atoms,
        }
    }
}

impl JointDistribution {
    /// Merges duplicate profiles, drops zero-weight atoms and sorts atoms
    /// by profile.
    pub fn new(n: usize, atoms: Vec<Atom>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidJoint("need at least one player".into()));
        }
        let mut merged: BTreeMap<Vec<Rational>, Rational> = BTreeMap::new();
        for a in atoms {
            if a.profile.len() != n {
                return Err(Error::InvalidJoint(format!(
                    "profile {:?} has length {}, expected {n}",
                    a.profile,
                    a.profile.len()
                )));
            }
            if a.weight.is_negative() {
                return Err(Error::InvalidJoint(format!("negative weight {}", a.weight)));
            }
            if let Some(v) = a.profile.iter().find(|v| v.is_negative()) {
                return Err(Error::InvalidJoint(format!("negative value {v}")));
            }
            *merged.entry(a.profile).or_default() += a.weight;
        }
        let atoms: Vec<Atom> = merged
            .into_iter()
            .filter(|(_, w)| !w.is_zero())
            .map(|(profile, weight)| Atom { profile, weight })
            .collect();
        if atoms.is_empty() {
            return Err(Error::InvalidJoint("no atom with positive weight".into()));
        }
        let total: Rational = atoms.iter().map(|a| &a.weight).sum();
        if total != Rational::one() {
            return Err(Error::InvalidJoint(format!("weights sum to {total}, not 1")));
        }
        Ok(JointDistribution { n, atoms })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Sorted distinct values of player `i` across atoms.
    pub fn support(&self, i: usize) -> Vec<Rational> {
        let mut vs: Vec<Rational> = self.atoms.iter().map(|a| a.profile[i].clone()).collect();
        vs.sort();
        vs.dedup();
        vs
    }

    pub fn supports(&self) -> Vec<Vec<Rational>> {
        (0..self.n).map(|i| self.support(i)).collect()
    }

    /// Largest step of which every value is an integer multiple (1 if all
    /// values are zero).
    pub fn value_step(&self) -> Rational {
        Rational::gcd_all(self.atoms.iter().flat_map(|a| a.profile.iter()))
            .unwrap_or_else(Rational::one)
    }

    pub fn weight_of(&self, profile: &[Rational]) -> Rational {
        self.atoms
            .binary_search_by(|a| a.profile.as_slice().cmp(profile))
            .map(|k| self.atoms[k].weight.clone())
            .unwrap_or_default()
    }

    /// Invariant under every permutation of the players.
    pub fn is_exchangeable(&self) -> bool {
        (0..self.n.saturating_sub(1)).all(|k| {
            self.atoms.iter().all(|a| {
                let mut p = a.profile.clone();
                p.swap(k, k + 1);
                self.weight_of(&p) == a.weight
            })
        })
    }

    /// Marginal of player `i` conditioned on `v_i >= v_k` for every `k`.
    pub fn conditional_top(&self, i: usize) -> Result<Marginal> {
        self.check_player(i)?;
        Marginal::from_pairs(
            self.atoms
                .iter()
                .filter(|a| a.profile.iter().all(|v| *v <= a.profile[i]))
                .map(|a| (a.profile[i].clone(), a.weight.clone())),
        )
    }

    /// Marginal of player `i` conditioned on the other players' values being
    /// `opponents` and on `i` being the designated highest bidder: strictly
    /// above lower-indexed players and weakly above higher-indexed ones.
    pub fn conditional_top_given(&self, i: usize, opponents: &[Rational]) -> Result<Marginal> {
        self.check_player(i)?;
        if opponents.len() + 1 != self.n {
            return Err(Error::InvalidArgument(format!(
                "expected {} opponent values",
                self.n - 1
            )));
        }
        Marginal::from_pairs(
            self.atoms
                .iter()
                .filter(|a| {
                    let vi = &a.profile[i];
                    let rest = a.profile.iter().enumerate().filter(|(k, _)| *k != i);
                    rest.clone().map(|(_, v)| v).eq(opponents.iter())
                        && rest.clone().all(|(k, v)| if k < i { v < vi } else { v <= vi })
                })
                .map(|a| (a.profile[i].clone(), a.weight.clone())),
        )
    }

    fn check_player(&self, i: usize) -> Result<()> {
        if i >= self.n {
            return Err(Error::InvalidArgument(format!(
                "player {} out of range for {} players",
                i + 1,
                self.n
            )));
        }
        Ok(())
    }
}

/// Independent product of marginals, keeping only positive-weight profiles.
pub fn product_joint(ds: &[DiscreteDistribution]) -> Result<JointDistribution> {
    product_joint_capped(ds, DEFAULT_ATOM_CAP)
}

pub fn product_joint_capped(ds: &[DiscreteDistribution], cap: u128) -> Result<JointDistribution> {
    if ds.is_empty() {
        return Err(Error::EmptyInput("no marginals".into()));
    }
    let supports: Vec<Vec<(Rational, Rational)>> = ds
        .iter()
        .map(|d| {
            (0..d.len())
                .filter(|&k| !d.pmf(k).is_zero())
                .map(|k| (d.value(k), d.pmf(k).clone()))
                .collect()
        })
        .collect();
    let count = supports
        .iter()
        .try_fold(1u128, |acc, s| acc.checked_mul(s.len() as u128))
        .unwrap_or(u128::MAX);
    if count > cap {
        return Err(Error::TooManyAtoms { count, cap });
    }
    let mut atoms = vec![Atom {
        profile: vec![],
        weight: Rational::one(),
    }];
    for s in &supports {
        let mut next = Vec::with_capacity(atoms.len() * s.len());
        for a in &atoms {
            for (v, w) in s {
                let mut profile = a.profile.clone();
                profile.push(v.clone());
                next.push(Atom {
                    profile,
                    weight: &a.weight * w,
                });
            }
        }
        atoms = next;
    }
    JointDistribution::new(ds.len(), atoms)
}

/// A finite weighted list of values, sorted ascending, weights summing to 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Marginal {
    pub points: Vec<(Rational, Rational)>,
}

impl Marginal {
    /// Merges equal values and renormalizes; errors if the total weight is zero.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Rational, Rational)>) -> Result<Self> {
        let mut merged: BTreeMap<Rational, Rational> = BTreeMap::new();
        for (v, w) in pairs {
            *merged.entry(v).or_default() += w;
        }
        let total: Rational = merged.values().sum();
        if !total.is_positive() {
            return Err(Error::EmptyCondition);
        }
        Ok(Marginal {
            points: merged
                .into_iter()
                .filter(|(_, w)| !w.is_zero())
                .map(|(v, w)| (v, w / &total))
                .collect(),
        })
    }
}

/// The revenue-maximizing posted price against `marginal`, restricted to its
/// support values; ties go to the lowest price.
pub fn best_take_it_or_leave_it(marginal: &Marginal) -> Result<(Rational, Rational)> {
    if marginal.points.is_empty() {
        return Err(Error::EmptyInput("empty marginal".into()));
    }
    let mut at_least: Rational = marginal.points.iter().map(|(_, w)| w).sum();
    let mut best: Option<(Rational, Rational)> = None;
    for (v, w) in &marginal.points {
        let rev = v * &at_least;
        if best.as_ref().is_none_or(|(_, r)| rev > *r) {
            best = Some((v.clone(), rev));
        }
        at_least -= w;
    }
    Ok(best.expect("nonempty"))
}
