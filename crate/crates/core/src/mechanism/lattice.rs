use serde::Serialize;

use super::{check_alpha_moral, PaymentGrid, Price, ProfitMaximizer, TieBreak};
use crate::error::{Error, Result};
use crate::rational::Rational;

/// Winner (or no sale) for every instance of a value grid, in flat-index
/// order (last player fastest).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AllocationTable {
    values: Vec<Vec<Rational>>,
    winners: Vec<Option<usize>>,
}

impl AllocationTable {
    pub fn new(values: Vec<Vec<Rational>>, winners: Vec<Option<usize>>) -> Result<Self> {
        let size: usize = values.iter().map(Vec::len).product();
        if winners.len() != size {
            return Err(Error::InvalidArgument(format!(
                "allocation table has {} entries, expected {size}",
                winners.len()
            )));
        }
        if winners.iter().flatten().any(|&w| w >= values.len()) {
            return Err(Error::InvalidArgument("winner index out of range".into()));
        }
        Ok(AllocationTable { values, winners })
    }

    pub fn from_fn(
        values: Vec<Vec<Rational>>,
        mut f: impl FnMut(&[usize]) -> Option<usize>,
    ) -> Result<Self> {
        let shape = PaymentGrid::from_fn(values.clone(), |_, _| Price::Never)?;
        let winners = (0..shape.instance_count())
            .map(|flat| f(&shape.profile_of(flat)))
            .collect();
        AllocationTable::new(values, winners)
    }

    pub fn values(&self) -> &[Vec<Rational>] {
        &self.values
    }

    pub fn winners(&self) -> &[Option<usize>] {
        &self.winners
    }

    pub fn winner(&self, profile: &[usize]) -> Option<usize> {
        let flat = profile
            .iter()
            .zip(&self.values)
            .fold(0, |acc, (&k, vs)| acc * vs.len() + k);
        self.winners[flat]
    }
}

/// The four instances of the rule-out pattern for players `i` and `j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RuleOutWitness {
    pub i: usize,
    pub j: usize,
    /// Values of the players other than `i` and `j`, in player order.
    pub rest: Vec<Rational>,
    pub v_i: Rational,
    pub v_i_alt: Rational,
    pub v_j: Rational,
    pub v_j_alt: Rational,
}

/// Searches for `f(v_i, v_j) = i`, `f(v'_i, v'_j) = i`, `f(v'_i, v_j) = j`,
/// `f(v_i, v'_j) = j` with every other value fixed. Such a table has no
/// alpha-moral implementation for any `alpha < 1`.
pub fn rule_out_pattern(table: &AllocationTable) -> Option<RuleOutWitness> {
    let n = table.values.len();
    let sizes: Vec<usize> = table.values.iter().map(Vec::len).collect();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let rest_players: Vec<usize> = (0..n).filter(|&k| k != i && k != j).collect();
            let rest_count: usize = rest_players.iter().map(|&k| sizes[k]).product();
            for r in 0..rest_count {
                let mut profile = vec![0; n];
                let mut x = r;
                for &k in rest_players.iter().rev() {
                    profile[k] = x % sizes[k];
                    x /= sizes[k];
                }
                let mut at = |a: usize, b: usize| {
                    profile[i] = a;
                    profile[j] = b;
                    table.winner(&profile)
                };
                for a in 0..sizes[i] {
                    for a2 in 0..sizes[i] {
                        for b in 0..sizes[j] {
                            for b2 in 0..sizes[j] {
                                if at(a, b) == Some(i)
                                    && at(a2, b2) == Some(i)
                                    && at(a2, b) == Some(j)
                                    && at(a, b2) == Some(j)
                                {
                                    return Some(RuleOutWitness {
                                        i,
                                        j,
                                        rest: rest_players
                                            .iter()
                                            .map(|&k| table.values[k][profile[k]].clone())
                                            .collect(),
                                        v_i: table.values[i][a].clone(),
                                        v_i_alt: table.values[i][a2].clone(),
                                        v_j: table.values[j][b].clone(),
                                        v_j_alt: table.values[j][b2].clone(),
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    None
}

/// Pointwise minimum and maximum of two grids whose 1-profit maximizers
/// (under `tiebreak`, zero-profit sales on) implement the same allocation.
///
/// The returned mechanisms keep that common allocation: where the combined
/// grid leaves several players tied at the maximal profit, the winner is
/// pinned to the shared one. Both are re-checked for 1-morality.
pub fn lattice_meet_join(
    a: &PaymentGrid,
    b: &PaymentGrid,
    tiebreak: TieBreak,
) -> Result<(ProfitMaximizer, ProfitMaximizer)> {
    if a.value_sets() != b.value_sets() {
        return Err(Error::InvalidArgument("grids have different value sets".into()));
    }
    let one = Rational::one();
    let ma = ProfitMaximizer::new(a.clone(), one.clone()).with_tiebreak(tiebreak);
    let mb = ProfitMaximizer::new(b.clone(), one.clone()).with_tiebreak(tiebreak);
    let ta = ma.allocation_table();
    if let Some(flat) = (0..a.instance_count()).find(|&f| ta.winners[f] != mb.allocation_table().winners[f]) {
        return Err(Error::AllocationMismatch {
            instance: a.values_of(&a.profile_of(flat)),
        });
    }
    let pin = |grid: PaymentGrid| -> Result<ProfitMaximizer> {
        let mut m = ProfitMaximizer::new(grid, one.clone()).with_tiebreak(tiebreak);
        for flat in 0..a.instance_count() {
            let p = a.profile_of(flat);
            m.set_override(&p, ta.winners[flat])
                .map_err(|e| Error::Defect(format!("lattice allocation not realizable: {e}")))?;
        }
        if m.allocation_table() != ta {
            return Err(Error::Defect("lattice grid changed the allocation".into()));
        }
        if !check_alpha_moral(&m, &one).moral {
            return Err(Error::Defect("lattice grid is not 1-moral".into()));
        }
        Ok(m)
    };
    let meet = pin(a.zip_with(b, |x, y| x.clone().min(y.clone()))?)?;
    let join = pin(a.zip_with(b, |x, y| x.clone().max(y.clone()))?)?;
    Ok((meet, join))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn vals() -> Vec<Vec<Rational>> {
        vec![vec![q("0"), q("1")]; 2]
    }

    #[test]
    fn swap_pattern_is_found() {
        // f(0,0)=1, f(1,1)=1, f(1,0)=2, f(0,1)=2
        let t = AllocationTable::from_fn(vals(), |p| Some(if p[0] == p[1] { 0 } else { 1 })).unwrap();
        let w = rule_out_pattern(&t).unwrap();
        assert_eq!((w.i, w.j), (0, 1));
        assert_eq!((w.v_i.clone(), w.v_i_alt.clone()), (q("0"), q("1")));
    }

    #[test]
    fn monotone_tables_have_no_pattern() {
        let g3 = vec![vec![q("0"), q("1/2"), q("1")]; 2];
        let highest = AllocationTable::from_fn(g3.clone(), |p| Some(if p[1] > p[0] { 1 } else { 0 })).unwrap();
        assert!(rule_out_pattern(&highest).is_none());
        let constant = AllocationTable::from_fn(g3, |_| Some(0)).unwrap();
        assert!(rule_out_pattern(&constant).is_none());
    }

    #[test]
    fn meet_join_of_identical_grids() {
        let g = PaymentGrid::from_fn(vals(), |_, opp| Price::Finite(opp[0].clone())).unwrap();
        let (lo, hi) = lattice_meet_join(&g, &g, TieBreak::HighestPayment).unwrap();
        assert_eq!(lo.grid, g);
        assert_eq!(hi.grid, g);
    }

    #[test]
    fn meet_join_rejects_different_allocations() {
        let a = PaymentGrid::from_fn(vals(), |_, _| Price::Finite(q("0"))).unwrap();
        let b = PaymentGrid::from_fn(vals(), |_, _| Price::Never).unwrap();
        assert!(matches!(
            lattice_meet_join(&a, &b, TieBreak::HighestPayment),
            Err(Error::AllocationMismatch { .. })
        ));
    }
}
