use super::*;
use crate::distributions::{product_joint, Atom, DiscreteDistribution};
use crate::rational::q;

fn joint(n: usize, atoms: &[(&[&str], &str)]) -> JointDistribution {
    JointDistribution::new(
        n,
        atoms
            .iter()
            .map(|(p, w)| Atom {
                profile: p.iter().map(|x| q(x)).collect(),
                weight: q(w),
            })
            .collect(),
    )
    .unwrap()
}

fn moral_optimum(j: &JointDistribution) -> Rational {
    let space = SearchSpace::new(j.supports(), Mode::Moral, Rational::one()).unwrap();
    brute_force_optimal(&space, j, &SearchOptions::default()).unwrap().best_revenue
}

#[test]
fn lookahead_offers_the_conditional_price() {
    let j = joint(2, &[(&["1", "0"], "1/2"), (&["2", "0"], "1/2")]);
    let la = lookahead(&j).unwrap();
    assert_eq!(la.revenue, q("1"));
    let g = &la.mechanism.grid;
    assert_eq!(g.price(0, 0), &Price::Finite(q("1")));
}

#[test]
fn lookahead_extracts_a_point_mass() {
    let j = joint(2, &[(&["3/4", "1/4"], "1")]);
    assert_eq!(lookahead(&j).unwrap().revenue, q("3/4"));
    let t = two_approx_check(&j, &Rational::one(), &SearchOptions::default()).unwrap();
    assert_eq!(t.ratio, Rational::one());
}

#[test]
fn lookahead_on_independent_uniforms() {
    let d = DiscreteDistribution::uniform(3).unwrap();
    let j = product_joint(&[d.clone(), d]).unwrap();
    let la = lookahead(&j).unwrap();
    assert!(is_truthful(&la.mechanism).holds());
    let best = moral_optimum(&j);
    assert!(la.revenue >= &best / Rational::int(2));
    assert!(la.revenue <= best);
}

#[test]
fn all_zero_values_pass_vacuously() {
    let j = joint(2, &[(&["0", "0"], "1")]);
    let t = two_approx_check(&j, &Rational::one(), &SearchOptions::default()).unwrap();
    assert!(t.passes);
    assert_eq!(t.ratio, Rational::one());
    assert_eq!(t.optimal_moral_revenue, Rational::zero());
}

#[test]
fn two_approximation_on_seeded_joints() {
    let cfg = GapConfig { support: 3, denom_cap: 12, samples: 0, seed: 5 };
    for idx in 0..60 {
        let j = gap_sample(&cfg, idx);
        let t = two_approx_check(&j, &Rational::one(), &SearchOptions::default()).unwrap();
        assert!(t.passes, "sample {idx}: {}", t.ratio);
    }
}

#[test]
fn moralize_shifts_player_one_and_fixes_player_two() {
    let d = DiscreteDistribution::uniform(3).unwrap();
    let m = crate::myerson::myerson_grid(&[d.clone(), d]).unwrap().mechanism;
    let out = moralize_transform(&m, &q("1/4"), &Price::Finite(q("1"))).unwrap();
    let g = &out.grid;
    assert_eq!(g.prices(0), &[Price::Finite(q("1/4")), Price::Finite(q("1/4")), Price::Finite(q("3/4"))]);
    assert!(g.prices(1).iter().all(|p| *p == Price::Finite(q("1"))));
    assert_eq!(out.alpha, Rational::one());
    let bad = crate::catalog::scaled_second_price(&q("1/2"), vec![crate::sampling::unit_grid(3); 2]).unwrap();
    assert!(matches!(
        moralize_transform(&bad, &q("1/4"), &Price::Never),
        Err(Error::NotTruthfulInput)
    ));
}

#[test]
fn moralize_with_no_shift_keeps_player_one_sales() {
    let j = joint(2, &[(&["1", "0"], "1/2"), (&["2", "0"], "1/2")]);
    let la = lookahead(&j).unwrap();
    let out = moralize_transform(&la.mechanism, &Rational::zero(), &Price::Never).unwrap();
    assert_eq!(expected_revenue(&out, &j).unwrap(), la.revenue);
}

#[test]
fn independent_joints_have_no_gap() {
    let d = DiscreteDistribution::uniform(3).unwrap();
    let j = product_joint(&[d.clone(), d]).unwrap();
    let (gap, _, _) = gap_of(&j, &SearchOptions::default()).unwrap();
    assert_eq!(gap, Rational::zero());
    let point = joint(2, &[(&["1/2", "1"], "1")]);
    assert_eq!(gap_of(&point, &SearchOptions::default()).unwrap().0, Rational::zero());
}

#[test]
fn gap_search_is_deterministic() {
    let cfg = GapConfig { support: 3, denom_cap: 12, samples: 300, seed: 1 };
    let a = gap_search(&cfg, &SearchOptions::default()).unwrap();
    let b = gap_search(&cfg, &SearchOptions { threads: Some(1), ..SearchOptions::default() }).unwrap();
    assert_eq!(a.best.sample, b.best.sample);
    assert_eq!(a.best.gap, b.best.gap);
    assert_eq!(a.samples_with_gap, b.samples_with_gap);
    assert!(!a.best.gap.is_negative());
}

#[test]
fn e_is_bracketed() {
    let (lo, hi) = e_bounds();
    assert!(lo < hi);
    assert!(lo.to_f64() < std::f64::consts::E + 1e-12 && hi.to_f64() > std::f64::consts::E - 1e-12);
    assert!(&hi - &lo < q("1/1000000000000000000"));
}

#[test]
fn h_properties_by_enumeration() {
    let j = joint(2, &[(&["1/2", "1"], "1/2"), (&["2", "1"], "1/2")]);
    let r = validate_h_properties(&j, &Rational::one(), &q("1/10"), &q("1/10"), &SearchOptions::default()).unwrap();
    assert!(r.finite_support.holds());
    assert!(matches!(r.values_at_least_one, Verdict::Fails(_)));
    assert!(r.player1_separation.holds());
    assert!(r.player2_band.holds());

    let j = joint(2, &[(&["1", "1"], "1/2"), (&["3", "1"], "1/2")]);
    let r = validate_h_properties(&j, &Rational::one(), &q("1/10"), &q("1/10"), &SearchOptions::default()).unwrap();
    assert!(r.values_at_least_one.holds() && r.player1_separation.holds() && r.player2_band.holds());
    // player 2 at 1 when player 1 is low, player 1 at 3 otherwise
    assert_eq!(r.optimal_truthful_revenue, Some(q("2")));
    assert!(matches!(r.truthful_revenue_bound, Verdict::Fails(_)));
    // serving player 1 alone earns only 3/2
    assert!(matches!(r.player2_never_optimal, Verdict::Fails(_)));
    assert!(!r.all_hold());

    let close = joint(2, &[(&["1", "1"], "1/2"), (&["21/20", "1"], "1/2")]);
    let r = validate_h_properties(&close, &Rational::one(), &q("1/10"), &q("1/10"), &SearchOptions::default()).unwrap();
    assert!(matches!(r.player1_separation, Verdict::Fails(_)));
    let wide = joint(2, &[(&["1", "2"], "1")]);
    let r = validate_h_properties(&wide, &Rational::one(), &q("1/10"), &q("1/10"), &SearchOptions::default()).unwrap();
    assert!(matches!(r.player2_band, Verdict::Fails(_)));
}

#[test]
fn moralize_gain_accounting() {
    // the player-1-only optimum posts 3; shifted to 29/10 it still sells at
    // (3, 1), and player 2 buys at 1 otherwise: 1/2 + 29/20 = 39/20, which
    // is 1/20 short of the truthful optimum 2
    let j = joint(2, &[(&["1", "1"], "1/2"), (&["3", "1"], "1/2")]);
    let g = moralize_gain(&j, &Rational::one(), &q("1/10"), &q("1/10"), &SearchOptions::default()).unwrap();
    assert_eq!(g.truthful_revenue, q("2"));
    assert_eq!(g.moralized_revenue, q("39/20"));
    assert_eq!(g.gain, q("-1/20"));
    assert!(matches!(g.verdict, Verdict::Fails(_)));
    assert!(g.moralized_is_moral);
}

#[test]
fn strict_gap_on_four_point_supports() {
    let cfg = GapConfig { support: 4, denom_cap: 12, samples: 0, seed: 0 };
    let j = gap_sample(&cfg, 543);
    let (gap, moral, truthful) = gap_of(&j, &SearchOptions::default()).unwrap();
    assert_eq!(gap, q("1/30"));
    let values = j.supports();
    let slow_moral = crate::search::enumerate_optimal(
        &SearchSpace::new(values.clone(), Mode::Moral, Rational::one()).unwrap(),
        &j,
        1 << 20,
    )
    .unwrap();
    let slow_truthful = crate::search::enumerate_optimal(
        &SearchSpace::new(values, Mode::Truthful, Rational::zero()).unwrap(),
        &j,
        1 << 20,
    )
    .unwrap();
    assert_eq!(slow_moral.best_revenue, moral.best_revenue);
    assert_eq!(slow_truthful.best_revenue, truthful.best_revenue);
    assert_eq!(moral.best_revenue, q("2/3"));
    assert_eq!(truthful.best_revenue, q("19/30"));
    let m = ProfitMaximizer::new(moral.best_grid.clone(), Rational::one());
    assert!(check_alpha_moral(&m, &Rational::one()).moral);
    assert!(!is_truthful(&m).holds());
}
