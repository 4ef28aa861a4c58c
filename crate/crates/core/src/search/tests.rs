use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::distributions::{product_joint, Atom, DiscreteDistribution};
use crate::mechanism::check_alpha_moral;
use crate::rational::q;
use crate::sampling::{random_joint, unit_grid};

fn iid(d: &DiscreteDistribution, n: usize) -> (Vec<Vec<Rational>>, JointDistribution) {
    (vec![d.values(); n], product_joint(&vec![d.clone(); n]).unwrap())
}

fn solve(values: &[Vec<Rational>], j: &JointDistribution, mode: Mode, alpha: &str) -> SearchResult {
    let s = SearchSpace::new(values.to_vec(), mode, q(alpha)).unwrap();
    brute_force_optimal(&s, j, &SearchOptions::default()).unwrap()
}

#[test]
fn candidate_lists() {
    let c = default_candidates(&unit_grid(3), &q("1/2"));
    let want: Vec<Price> = ["0", "1/2", "1", "3/2", "never"].iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(c, want);
    let c = default_candidates(&[q("0")], &q("1/4"));
    assert_eq!(c, vec![Price::Finite(q("0")), Price::Finite(q("1/4")), Price::Never]);
    // above the top value a price is as good as never
    let s = SearchSpace::new(vec![unit_grid(3); 2], Mode::Truthful, q("0")).unwrap();
    assert_eq!(s.candidates[0].len(), 4);
}

#[test]
fn uniform_three_points() {
    let d = DiscreteDistribution::uniform(3).unwrap();
    let (v, j) = iid(&d, 2);
    let t = solve(&v, &j, Mode::Truthful, "0");
    let m = solve(&v, &j, Mode::Moral, "1");
    assert_eq!(t.best_revenue, q("5/9"));
    assert_eq!(m.best_revenue, q("5/9"));
    assert!(t.is_truthful_flag);
}

#[test]
fn single_player_posts_the_monopoly_price() {
    let d = DiscreteDistribution::uniform(3).unwrap();
    let (v, j) = iid(&d, 1);
    for mode in [Mode::Truthful, Mode::Moral] {
        assert_eq!(solve(&v, &j, mode, "1").best_revenue, q("1/3"));
    }
}

#[test]
fn point_mass_is_fully_extracted() {
    let j = JointDistribution::new(2, vec![Atom { profile: vec![q("1"), q("1")], weight: q("1") }]).unwrap();
    let r = solve(&[unit_grid(3), unit_grid(3)], &j, Mode::Moral, "1");
    assert_eq!(r.best_revenue, q("1"));
}

#[test]
fn exponential_three_points() {
    let d = DiscreteDistribution::exponential(3, &crate::distributions::default_e()).unwrap();
    let (v, j) = iid(&d, 2);
    let want = q("36391744093705/123867172570969");
    assert_eq!(solve(&v, &j, Mode::Truthful, "0").best_revenue, want);
    assert_eq!(solve(&v, &j, Mode::Moral, "1").best_revenue, want);
}

#[test]
fn agrees_with_enumeration_on_random_joints() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let opts = SearchOptions::default();
    for round in 0..12 {
        let vals = vec![unit_grid(2 + round % 2), unit_grid(3)];
        let j = random_joint(&mut rng, &vals, 12);
        for (mode, alpha) in [(Mode::Truthful, "0"), (Mode::Moral, "1"), (Mode::Moral, "1/2")] {
            let s = SearchSpace::new(vals.clone(), mode, q(alpha)).unwrap();
            let fast = brute_force_optimal(&s, &j, &opts).unwrap();
            let slow = enumerate_optimal(&s, &j, 1 << 20).unwrap();
            assert_eq!(fast.best_revenue, slow.best_revenue, "{mode:?} {alpha}");
            let quick = SearchOptions { lex_smallest: false, ..SearchOptions::default() };
            let any = brute_force_optimal(&s, &j, &quick).unwrap();
            assert_eq!(any.best_revenue, fast.best_revenue);
            assert_eq!(any.optima_count, fast.optima_count);
            let m = ProfitMaximizer::new(fast.best_grid.clone(), q(alpha));
            assert!(check_alpha_moral(&m, &fast.alpha).moral);
            if mode == Mode::Truthful || alpha == "1" {
                // same feasible set, so the same smallest optimum and count
                assert_eq!(fast.best_grid, slow.best_grid);
                assert_eq!(fast.optima_count, slow.optima_count);
            }
        }
    }
}

#[test]
fn symmetric_grids_are_a_lower_bound() {
    let sym = SearchOptions { symmetry: true, ..Default::default() };
    for points in [3, 4] {
        let d = DiscreteDistribution::uniform(points).unwrap();
        let (v, j) = iid(&d, 2);
        for (mode, alpha) in [(Mode::Truthful, "0"), (Mode::Moral, "1"), (Mode::Moral, "1/2")] {
            let s = SearchSpace::new(v.clone(), mode, q(alpha)).unwrap();
            let pruned = brute_force_optimal(&s, &j, &sym).unwrap();
            let full = brute_force_optimal(&s, &j, &SearchOptions::default()).unwrap();
            assert!(pruned.symmetric && !full.symmetric);
            assert!(pruned.best_revenue <= full.best_revenue);
        }
    }
    // on four points the best symmetric grid misses the top-pair premium
    let d = DiscreteDistribution::uniform(4).unwrap();
    let (v, j) = iid(&d, 2);
    let s = SearchSpace::new(v, Mode::Truthful, q("0")).unwrap();
    assert_eq!(brute_force_optimal(&s, &j, &sym).unwrap().best_revenue, q("25/48"));
    assert_eq!(brute_force_optimal(&s, &j, &SearchOptions::default()).unwrap().best_revenue, q("13/24"));
}

#[test]
fn thread_count_does_not_change_the_result() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let vals = vec![unit_grid(4); 2];
    let j = random_joint(&mut rng, &vals, 12);
    let s = SearchSpace::new(vals, Mode::Truthful, q("0")).unwrap();
    let runs: Vec<SearchResult> = [1, 2, 4]
        .iter()
        .map(|&k| brute_force_optimal(&s, &j, &SearchOptions { threads: Some(k), ..Default::default() }).unwrap())
        .collect();
    for r in &runs[1..] {
        assert_eq!(r.best_grid, runs[0].best_grid);
        assert_eq!(r.best_revenue, runs[0].best_revenue);
        assert_eq!(r.optima_count, runs[0].optima_count);
    }
}

#[test]
fn denser_prices_do_not_help() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let opts = SearchOptions { symmetry: false, ..Default::default() };
    for _ in 0..6 {
        let vals = vec![unit_grid(3); 2];
        let j = random_joint(&mut rng, &vals, 12);
        for (mode, alpha) in [(Mode::Truthful, "0"), (Mode::Moral, "1"), (Mode::Moral, "1/2")] {
            let s = SearchSpace::new(vals.clone(), mode, q(alpha)).unwrap();
            let base = brute_force_optimal(&s, &j, &opts).unwrap();
            let fine = brute_force_optimal(&s.refined(2).unwrap(), &j, &opts).unwrap();
            assert_eq!(base.best_revenue, fine.best_revenue, "{mode:?} {alpha}");
        }
    }
}

#[test]
fn sweep_is_flat_on_iid_uniform() {
    let d = DiscreteDistribution::uniform(3).unwrap();
    let (v, j) = iid(&d, 2);
    let alphas: Vec<Rational> = ["0", "1/4", "1/2", "3/4", "1"].iter().map(|s| q(s)).collect();
    let rows = optimal_alpha_sweep(&v, &j, &alphas, &SearchOptions::default()).unwrap();
    assert!(rows.iter().all(|r| r.result.best_revenue == q("5/9")));
    let t = solve(&v, &j, Mode::Truthful, "0");
    assert_eq!(rows[0].result.best_grid, t.best_grid);
}

#[test]
fn caps_and_infeasibility() {
    let d = DiscreteDistribution::uniform(3).unwrap();
    let (v, j) = iid(&d, 2);
    let s = SearchSpace::new(v.clone(), Mode::Truthful, q("0")).unwrap();
    assert!(matches!(
        brute_force_optimal(&s, &j, &SearchOptions { cap: 10, ..Default::default() }),
        Err(Error::SpaceTooLarge { .. })
    ));
    let forced = s.force_player(0, Price::Finite(q("0"))).force_player(1, Price::Finite(q("0")));
    assert!(matches!(
        brute_force_optimal(&forced, &j, &SearchOptions::default()),
        Err(Error::InfeasibleSpace)
    ));
}
