use serde::Serialize;

use super::{Outcome, Price, ProfitMaximizer};
use crate::rational::Rational;
use crate::Check;

/// One profitable lie that gains more than `alpha` times what it costs the
/// other players.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub instance: Vec<Rational>,
    pub deviator: usize,
    pub lie: Rational,
    pub gain: Rational,
    pub others_loss: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MoralityReport {
    pub alpha: Rational,
    pub moral: bool,
    pub violations: Vec<Violation>,
}

/// Profit accounting of a single misreport.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Deviation {
    pub gain: Rational,
    /// Sum over the other players of their profit decrease.
    pub loss_sum: Rational,
    /// Largest single profit decrease among the other players.
    pub loss_max: Rational,
}

fn account(
    values: &[Rational],
    deviator: usize,
    truth: &Outcome,
    lie: &Outcome,
) -> Deviation {
    let gain = lie.utility(deviator, &values[deviator]) - truth.utility(deviator, &values[deviator]);
    let mut loss_sum = Rational::zero();
    let mut loss_max: Option<Rational> = None;
    for (k, v) in values.iter().enumerate() {
        if k == deviator {
            continue;
        }
        let loss = truth.utility(k, v) - lie.utility(k, v);
        loss_sum += &loss;
        loss_max = Some(match loss_max {
            Some(m) => m.max(loss),
            None => loss,
        });
    }
    Deviation {
        gain,
        loss_sum,
        loss_max: loss_max.unwrap_or_default(),
    }
}

/// Accounting for player `deviator` reporting value index `lie` at the
/// index profile `profile`.
pub fn deviation(m: &ProfitMaximizer, profile: &[usize], deviator: usize, lie: usize) -> Deviation {
    let values = m.grid.values_of(profile);
    let truth = m.allocate_indices(profile);
    let mut lied = profile.to_vec();
    lied[deviator] = lie;
    account(&values, deviator, &truth, &m.allocate_indices(&lied))
}

/// Enumerates every instance, deviator and lie and reports each profitable
/// lie whose gain exceeds `alpha_test` times the others' total loss.
/// Violations come in lexicographic order of (instance, deviator, lie).
pub fn check_alpha_moral(m: &ProfitMaximizer, alpha_test: &Rational) -> MoralityReport {
    let g = &m.grid;
    let outcomes = m.outcomes();
    let mut violations = vec![];
    for flat in 0..g.instance_count() {
        let profile = g.profile_of(flat);
        let values = g.values_of(&profile);
        for i in 0..g.n() {
            let stride = g.stride(i);
            let base = flat - profile[i] * stride;
            for lie in 0..g.values(i).len() {
                let lied = &outcomes[base + lie * stride];
                let d = account(&values, i, &outcomes[flat], lied);
                if d.gain.is_positive() && d.gain > alpha_test * &d.loss_sum {
                    violations.push(Violation {
                        instance: values.clone(),
                        deviator: i,
                        lie: g.values(i)[lie].clone(),
                        gain: d.gain,
                        others_loss: d.loss_sum,
                    });
                }
            }
        }
    }
    MoralityReport {
        alpha: alpha_test.clone(),
        moral: violations.is_empty(),
        violations,
    }
}

/// At most one player with strictly positive potential profit in every
/// instance. The witness is the first instance with two or more.
pub fn is_truthful(m: &ProfitMaximizer) -> Check<Vec<Rational>> {
    let g = &m.grid;
    for flat in 0..g.instance_count() {
        let profile = g.profile_of(flat);
        let values = g.values_of(&profile);
        let positive = g
            .prices_at(&profile)
            .iter()
            .zip(&values)
            .filter(|(p, v)| p.profit(v).is_some_and(|x| x.is_positive()))
            .count();
        if positive >= 2 {
            return Check::Fails(values);
        }
    }
    Check::Holds
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MonotonicityWitness {
    pub player: usize,
    pub opponents: Vec<Rational>,
    pub winning_value: Rational,
    pub losing_value: Rational,
}

/// Winning at a value implies winning at every higher value, for every
/// player and opponent tuple.
pub fn is_monotone_allocation(m: &ProfitMaximizer) -> Check<MonotonicityWitness> {
    let g = &m.grid;
    let outcomes = m.outcomes();
    for i in 0..g.n() {
        for t in 0..g.tuple_count(i) {
            let mut first_win: Option<usize> = None;
            for own in 0..g.values(i).len() {
                let wins = outcomes[g.flat_of(&g.with_own(i, t, own))].winner == Some(i);
                match (wins, first_win) {
                    (true, None) => first_win = Some(own),
                    (false, Some(w)) => {
                        return Check::Fails(MonotonicityWitness {
                            player: i,
                            opponents: g.opponent_values(i, t),
                            winning_value: g.values(i)[w].clone(),
                            losing_value: g.values(i)[own].clone(),
                        })
                    }
                    _ => {}
                }
            }
        }
    }
    Check::Holds
}

/// The alpha-profit-maximizer side condition: at every instance with a
/// winner `w`, each other player `j` has `v_j - p_j <= alpha (v_w - p_w)`.
/// Witness is `(instance, j)`.
pub fn side_condition(m: &ProfitMaximizer, alpha: &Rational) -> Check<(Vec<Rational>, usize)> {
    let g = &m.grid;
    for flat in 0..g.instance_count() {
        let profile = g.profile_of(flat);
        let out = m.allocate_indices(&profile);
        let Some(w) = out.winner else { continue };
        let values = g.values_of(&profile);
        let bound = alpha * (&values[w] - &out.payment);
        for (j, p) in g.prices_at(&profile).into_iter().enumerate() {
            if j == w {
                continue;
            }
            if let Price::Finite(p) = p {
                if &values[j] - p > bound {
                    return Check::Fails((values, j));
                }
            }
        }
    }
    Check::Holds
}
