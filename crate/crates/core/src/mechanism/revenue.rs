use super::{is_monotone_allocation, is_truthful, ProfitMaximizer};
use crate::distributions::JointDistribution;
use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::Check;

/// Probability of every instance of `m`'s grid under `joint`, in flat-index
/// order.
pub fn instance_weights(m: &ProfitMaximizer, joint: &JointDistribution) -> Result<Vec<Rational>> {
    let g = &m.grid;
    if joint.n() != g.n() {
        return Err(Error::InvalidArgument(format!(
            "joint has {} players, mechanism has {}",
            joint.n(),
            g.n()
        )));
    }
    let mut w = vec![Rational::zero(); g.instance_count()];
    for atom in joint.atoms() {
        let idx = g.indices_of(&atom.profile)?;
        w[g.flat_of(&idx)] += &atom.weight;
    }
    Ok(w)
}

pub fn expected_revenue(m: &ProfitMaximizer, joint: &JointDistribution) -> Result<Rational> {
    let g = &m.grid;
    let mut total = Rational::zero();
    for atom in joint.atoms() {
        let idx = g.indices_of(&atom.profile)?;
        let out = m.allocate_indices(&idx);
        if out.winner.is_some() {
            total += &atom.weight * &out.payment;
        }
    }
    Ok(total)
}

/// Checks that a mechanism implementing the same allocation as a truthful
/// one never charges the winner more. Witness: first instance (as values)
/// where `moral` charges more.
pub fn dominance_check(
    truthful: &ProfitMaximizer,
    moral: &ProfitMaximizer,
) -> Result<Check<Vec<Rational>>> {
    if truthful.grid.value_sets() != moral.grid.value_sets() {
        return Err(Error::InvalidArgument("mechanisms have different value sets".into()));
    }
    if let Check::Fails(at) = is_truthful(truthful) {
        return Err(Error::NotTruthful(format!(
            "two positive profits at {}",
            crate::io::fmt_profile(&at)
        )));
    }
    if let Check::Fails(w) = is_monotone_allocation(truthful) {
        return Err(Error::NotTruthful(format!(
            "allocation not monotone for player {}",
            w.player + 1
        )));
    }
    let g = &truthful.grid;
    let a = truthful.outcomes();
    let b = moral.outcomes();
    for (flat, (x, y)) in a.iter().zip(&b).enumerate() {
        if x.winner != y.winner {
            return Err(Error::AllocationMismatch {
                instance: g.values_of(&g.profile_of(flat)),
            });
        }
    }
    for (flat, (x, y)) in a.iter().zip(&b).enumerate() {
        if y.payment > x.payment {
            return Ok(Check::Fails(g.values_of(&g.profile_of(flat))));
        }
    }
    Ok(Check::Holds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{product_joint, DiscreteDistribution};
    use crate::mechanism::{PaymentGrid, Price};
    use crate::rational::q;

    fn scaled(c: &str) -> ProfitMaximizer {
        let vals = vec![vec![q("0"), q("1/2"), q("1")]; 2];
        let c = q(c);
        let g = PaymentGrid::from_fn(vals, |_, opp| Price::Finite(&c * &opp[0])).unwrap();
        ProfitMaximizer::new(g, q("1"))
    }

    #[test]
    fn second_price_revenue_on_uniform_pair() {
        let d = DiscreteDistribution::uniform(3).unwrap();
        let j = product_joint(&[d.clone(), d]).unwrap();
        assert_eq!(expected_revenue(&scaled("1"), &j).unwrap(), q("5/18"));
        assert_eq!(expected_revenue(&scaled("1/2"), &j).unwrap(), q("5/36"));
        let w = instance_weights(&scaled("1"), &j).unwrap();
        assert!(w.iter().all(|x| *x == q("1/9")));
    }

    #[test]
    fn never_grid_earns_nothing() {
        let d = DiscreteDistribution::uniform(3).unwrap();
        let j = product_joint(&[d.clone(), d]).unwrap();
        let g = PaymentGrid::from_fn(vec![d_values(); 2], |_, _| Price::Never).unwrap();
        assert!(expected_revenue(&ProfitMaximizer::new(g, q("1")), &j).unwrap().is_zero());
    }

    fn d_values() -> Vec<Rational> {
        vec![q("0"), q("1/2"), q("1")]
    }

    #[test]
    fn truthful_payments_dominate() {
        assert!(dominance_check(&scaled("1"), &scaled("1/2")).unwrap().holds());
        assert!(dominance_check(&scaled("1"), &scaled("1")).unwrap().holds());
        assert!(matches!(
            dominance_check(&scaled("1/2"), &scaled("1")),
            Err(Error::NotTruthful(_))
        ));
    }

    #[test]
    fn corrupted_grid_is_rejected() {
        let mut bad = scaled("1");
        // player 1 against v2 = 0 now faces 3/4: at (1/2, 0) nobody buys
        bad.grid.set_price(0, 0, Price::Finite(q("3/4"))).unwrap();
        assert!(matches!(
            dominance_check(&scaled("1"), &bad),
            Err(Error::AllocationMismatch { .. })
        ));
    }
}
