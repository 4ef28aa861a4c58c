use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::catalog::scaled_second_price;
use crate::distributions::default_e;
use crate::mechanism::{check_alpha_moral, expected_revenue};
use crate::rational::q;
use crate::sampling::random_grid;
use crate::search::{brute_force_optimal, Mode, SearchOptions, SearchSpace};

fn fin(s: &str) -> Price {
    Price::Finite(q(s))
}

fn truthful_optimum(ds: &[DiscreteDistribution]) -> Rational {
    let joint = product_joint(ds).unwrap();
    let space = SearchSpace::new(ds.iter().map(|d| d.values()).collect(), Mode::Truthful, Rational::zero()).unwrap();
    let opts = SearchOptions { cap: 400_000_000, lex_smallest: false, ..SearchOptions::default() };
    brute_force_optimal(&space, &joint, &opts).unwrap().best_revenue
}

fn closed_form_revenue(ds: &[DiscreteDistribution]) -> Rational {
    let mg = myerson_grid(ds).unwrap();
    assert!(mg.pattern_exceptions.is_empty(), "{:?}", mg.pattern_exceptions);
    assert!(mg.q.is_monotone().unwrap().holds());
    expected_revenue(&mg.mechanism, &product_joint(ds).unwrap()).unwrap()
}

#[test]
fn two_uniform_three_point_players() {
    let d = DiscreteDistribution::uniform(3).unwrap();
    let mg = myerson_grid(&[d.clone(), d.clone()]).unwrap();
    let g = &mg.mechanism.grid;
    assert_eq!(g.prices(0), &[fin("1/2"), fin("1/2"), fin("1")]);
    assert_eq!(g.prices(1), &[fin("1/2"), fin("1"), Price::Never]);
    assert!(critical_price_pattern(&mg.mechanism, &mg.reserves[0]).holds());
    assert_eq!(closed_form_revenue(&[d.clone(), d]), q("5/9"));
}

#[test]
fn single_player_gets_the_reserve() {
    let d = DiscreteDistribution::uniform(4).unwrap();
    let mg = myerson_grid(std::slice::from_ref(&d)).unwrap();
    assert_eq!(mg.mechanism.grid.prices(0), &[fin("2/3")]);
    assert_eq!(mg.q.get(0, 0), Some(&q("2/3")));
}

#[test]
fn matches_the_truthful_optimum() {
    let e = default_e();
    let cases: Vec<Vec<DiscreteDistribution>> = vec![
        vec![DiscreteDistribution::uniform(3).unwrap(); 2],
        vec![DiscreteDistribution::uniform(4).unwrap(); 2],
        vec![DiscreteDistribution::exponential(3, &e).unwrap(); 2],
        vec![DiscreteDistribution::exponential(4, &e).unwrap(); 2],
        vec![DiscreteDistribution::uniform(3).unwrap(), DiscreteDistribution::exponential(3, &e).unwrap()],
        vec![DiscreteDistribution::from_weights(&[q("1"), q("2"), q("2")]).unwrap(), DiscreteDistribution::uniform(3).unwrap()],
    ];
    for ds in cases {
        assert_eq!(closed_form_revenue(&ds), truthful_optimum(&ds));
    }
}

#[test]
fn critical_prices_for_iid_pairs() {
    for points in [3, 4, 5] {
        let d = DiscreteDistribution::uniform(points).unwrap();
        let mg = myerson_grid(&[d.clone(), d]).unwrap();
        assert!(critical_price_pattern(&mg.mechanism, &mg.reserves[0]).holds(), "{points}");
    }
}

#[test]
fn irregular_input_is_rejected() {
    let d = DiscreteDistribution::from_weights(&[q("4"), q("1"), q("4")]).unwrap();
    assert!(matches!(myerson_grid(&[d.clone(), d]), Err(Error::NotRegular { .. })));
}

#[test]
fn lift_leaves_a_clean_grid_alone() {
    let d = DiscreteDistribution::uniform(4).unwrap();
    let mut m = myerson_grid(&[d.clone(), d.clone()]).unwrap().mechanism;
    m.alpha = Rational::one();
    let (out, trace) = lift(&m, &d).unwrap();
    assert!(trace.steps.is_empty());
    assert_eq!(out.grid, m.grid);
}

#[test]
fn lift_of_half_second_price() {
    let d = DiscreteDistribution::uniform(3).unwrap();
    let m = scaled_second_price(&q("1/2"), vec![d.values(); 2]).unwrap();
    let joint = product_joint(&[d.clone(), d.clone()]).unwrap();
    let (out, trace) = lift(&m, &d).unwrap();
    assert!(is_truthful(&out).holds());
    assert!(trace.is_non_decreasing());
    assert_eq!(trace.initial_revenue, expected_revenue(&m, &joint).unwrap());
    assert_eq!(trace.final_revenue, expected_revenue(&out, &joint).unwrap());
    assert!(trace.final_revenue >= trace.initial_revenue);
    assert_eq!(trace.final_revenue, q("1/2"));
}

#[test]
fn lift_keeps_the_moral_optimum() {
    for points in [3, 4] {
        let d = DiscreteDistribution::uniform(points).unwrap();
        let joint = product_joint(&[d.clone(), d.clone()]).unwrap();
        let space = SearchSpace::new(vec![d.values(); 2], Mode::Moral, Rational::one()).unwrap();
        let best = brute_force_optimal(&space, &joint, &SearchOptions::default()).unwrap();
        let m = ProfitMaximizer::new(best.best_grid, Rational::one());
        let (out, trace) = lift(&m, &d).unwrap();
        assert!(is_truthful(&out).holds());
        assert_eq!(trace.final_revenue, best.best_revenue);
    }
}

#[test]
fn lift_never_loses_revenue_on_random_moral_grids() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut done = 0;
    let mut rules = std::collections::BTreeSet::new();
    while done < 40 {
        let points = 3 + done % 2;
        let d = DiscreteDistribution::uniform(points).unwrap();
        let m = ProfitMaximizer::new(random_grid(&mut rng, 2, points), Rational::one());
        if !check_alpha_moral(&m, &Rational::one()).moral {
            continue;
        }
        let (out, trace) = lift(&m, &d).unwrap();
        assert!(trace.is_non_decreasing());
        assert!(is_truthful(&out).holds());
        rules.extend(trace.steps.iter().map(|s| s.rule));
        done += 1;
    }
    assert!(rules.contains(&LiftRule::SmallerPrice));
    assert!(rules.contains(&LiftRule::BelowReserve));
}

#[test]
fn lift_rejects_bad_inputs() {
    let d = DiscreteDistribution::uniform(3).unwrap();
    let m = scaled_second_price(&q("1/2"), vec![d.values(); 2]).unwrap();
    let mut half = m.clone();
    half.alpha = q("1/2");
    assert!(matches!(lift(&half, &d), Err(Error::InvalidArgument(_))));
    let skew = DiscreteDistribution::from_weights(&[q("4"), q("1"), q("4")]).unwrap();
    assert!(matches!(lift(&m, &skew), Err(Error::NotStandard { .. })));
    let other = DiscreteDistribution::uniform(4).unwrap();
    assert!(matches!(lift(&m, &other), Err(Error::InvalidArgument(_))));
}

#[test]
fn lowering_toward_the_reserve() {
    let d = DiscreteDistribution::uniform(3).unwrap();
    // player 1 alone against v2 = 0, priced one step above 1/2
    let grid = PaymentGrid::new(
        vec![d.values(); 2],
        vec![vec![fin("1"), Price::Never, Price::Never], vec![Price::Never; 3]],
    )
    .unwrap();
    let m = ProfitMaximizer::new(grid, Rational::one());
    assert!(rev_max_price_check(&m, &d, 0, 0, &q("1/2")).unwrap());
    assert!(rev_max_price_check(&m, &d, 0, 0, &q("1")).unwrap());
    assert!(matches!(
        rev_max_price_check(&m, &d, 0, 0, &q("0")),
        Err(Error::HypothesisFails(_))
    ));
}

#[test]
fn off_grid_prices_snap_without_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut done = 0;
    for c in ["1/3", "1/2", "2/3", "3/4"] {
        for points in [3, 4] {
            let d = DiscreteDistribution::uniform(points).unwrap();
            let m = scaled_second_price(&q(c), vec![d.values(); 2]).unwrap();
            let (out, trace) = lift(&m, &d).unwrap();
            assert!(trace.is_non_decreasing() && is_truthful(&out).holds());
        }
    }
    let mut tries = 0;
    while done < 200 && tries < 200_000 {
        tries += 1;
        let points = 3 + tries % 2;
        let d = DiscreteDistribution::uniform(points).unwrap();
        let vals = d.values();
        let step = d.eps().clone();
        let mut pool: Vec<Price> = vals.iter().map(|v| Price::Finite(v.clone())).collect();
        pool.extend(vals.iter().map(|v| Price::Finite(v + &step * q("1/2"))));
        pool.push(Price::Never);
        use rand::seq::SliceRandom;
        let grid = PaymentGrid::from_fn(vec![vals; 2], |_, _| pool.choose(&mut rng).unwrap().clone()).unwrap();
        let m = ProfitMaximizer::new(grid, Rational::one());
        if !check_alpha_moral(&m, &Rational::one()).moral {
            continue;
        }
        let (out, trace) = lift(&m, &d).unwrap();
        assert!(trace.is_non_decreasing() && is_truthful(&out).holds());
        done += 1;
    }
    assert_eq!(done, 200);
}

#[test]
fn three_iid_players() {
    let d = DiscreteDistribution::uniform(3).unwrap();
    let ds = vec![d; 3];
    assert_eq!(closed_form_revenue(&ds), truthful_optimum(&ds));
}
