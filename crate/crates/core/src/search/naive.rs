use num_traits::ToPrimitive;

use super::{Mode, SearchResult, SearchSpace};
use crate::distributions::JointDistribution;
use crate::error::{Error, Result};
use crate::mechanism::{check_alpha_moral, expected_revenue, is_truthful, PaymentGrid, ProfitMaximizer};
use crate::rational::Rational;

/// Lists every grid of the unpruned space in lexicographic order, filters
/// with [`is_truthful`] or [`check_alpha_moral`] and evaluates
/// [`expected_revenue`] on each. Only for small spaces: `cap` bounds the
/// number of grids.
pub fn enumerate_optimal(space: &SearchSpace, joint: &JointDistribution, cap: u128) -> Result<SearchResult> {
    let size = space.space_size();
    let grids = size.to_u128().unwrap_or(u128::MAX);
    if grids > cap {
        return Err(Error::SpaceTooLarge { work: grids, cap });
    }
    let shape = space.shape();
    let n = shape.n();
    // one digit per entry, player-major; the last entry turns fastest
    let entries: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..shape.tuple_count(i)).map(move |t| (i, t)))
        .collect();
    let mut digits = vec![0usize; entries.len()];
    let alpha = match space.mode {
        Mode::Truthful => Rational::zero(),
        Mode::Moral => space.alpha.clone(),
    };
    let mut best: Option<(Rational, PaymentGrid, u128)> = None;
    loop {
        let mut prices: Vec<Vec<_>> = (0..n).map(|i| Vec::with_capacity(shape.tuple_count(i))).collect();
        for (&(i, _), &d) in entries.iter().zip(&digits) {
            prices[i].push(space.candidates[i][d].clone());
        }
        let grid = PaymentGrid::new(space.values.clone(), prices)?;
        let m = ProfitMaximizer::new(grid, alpha.clone()).with_tiebreak(space.tiebreak);
        let feasible = match space.mode {
            Mode::Truthful => is_truthful(&m).holds(),
            Mode::Moral => check_alpha_moral(&m, &alpha).moral,
        };
        if feasible {
            let r = expected_revenue(&m, joint)?;
            match &mut best {
                Some((b, _, c)) if *b == r => *c += 1,
                Some((b, _, _)) if *b > r => {}
                _ => best = Some((r, m.grid, 1)),
            }
        }
        // odometer
        let mut k = entries.len();
        loop {
            if k == 0 {
                let (revenue, grid, count) = best.ok_or(Error::InfeasibleSpace)?;
                let m = ProfitMaximizer::new(grid.clone(), alpha.clone()).with_tiebreak(space.tiebreak);
                return Ok(SearchResult {
                    mode: space.mode,
                    alpha,
                    best_revenue: revenue,
                    best_secondary: None,
                    is_truthful_flag: is_truthful(&m).holds(),
                    best_grid: grid,
                    optima_count: count,
                    symmetric: false,
                    space_size: size.to_string(),
                    work: grids,
                });
            }
            k -= 1;
            let i = entries[k].0;
            digits[k] += 1;
            if digits[k] < space.candidates[i].len() {
                break;
            }
            digits[k] = 0;
        }
    }
}
