//! Property tests across modules, on seeded random instances.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use moral_mech::catalog::scaled_second_price;
use moral_mech::correlated::lookahead;
use moral_mech::distributions::{product_joint, DiscreteDistribution};
use moral_mech::mechanism::{check_alpha_moral, dominance_check, expected_revenue, is_truthful, ProfitMaximizer};
use moral_mech::myerson::{lift, myerson_grid};
use moral_mech::sampling::{random_distribution, random_grid, random_joint, random_mass_ratio_distribution, unit_grid};
use moral_mech::search::{brute_force_optimal, Mode, SearchOptions, SearchSpace};
use moral_mech::Rational;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn any_optimum() -> SearchOptions {
    SearchOptions {
        lex_smallest: false,
        ..SearchOptions::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn virtual_value_endpoints(seed in any::<u64>(), points in 2usize..=7) {
        let d = random_distribution(&mut rng(seed), points, 12);
        let phi = d.virtual_values().unwrap();
        prop_assert!(!phi[0].is_positive());
        prop_assert_eq!(phi.last().unwrap(), &d.top());
    }

    #[test]
    fn standard_implies_regular(seed in any::<u64>(), points in 2usize..=6) {
        let d = random_distribution(&mut rng(seed), points, 12);
        if d.is_standard().unwrap().holds() {
            prop_assert!(d.is_regular().unwrap().holds());
        }
    }

    #[test]
    fn mass_ratio_condition_implies_standard(seed in any::<u64>(), points in 2usize..=6) {
        let d = random_mass_ratio_distribution(&mut rng(seed), points);
        prop_assert!(d.satisfies_mass_ratio_condition());
        prop_assert!(d.is_standard().unwrap().holds());
    }

    #[test]
    fn product_weights_sum_to_one(seed in any::<u64>(), n in 1usize..=3) {
        let mut r = rng(seed);
        let ds: Vec<DiscreteDistribution> = (0..n).map(|_| {
            let points = r.gen_range(2..=4);
            random_distribution(&mut r, points, 9)
        }).collect();
        let j = product_joint(&ds).unwrap();
        let total = j.atoms().iter().fold(Rational::zero(), |acc, a| acc + a.weight.clone());
        prop_assert_eq!(total, Rational::one());
    }

    #[test]
    fn monopolist_price_maximizes_posted_revenue(seed in any::<u64>(), points in 2usize..=6) {
        let d = random_distribution(&mut rng(seed), points, 12);
        if d.is_regular().unwrap().holds() {
            let r = d.reserve_price().unwrap();
            let best = d.posted_price_revenue(d.index_of(&r).unwrap());
            for k in 0..d.len() {
                prop_assert!(d.posted_price_revenue(k) <= best);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn moral_optimum_dominates_truthful_and_lookahead(seed in any::<u64>(), a in 2usize..=3, b in 2usize..=3) {
        let mut r = rng(seed);
        let j = random_joint(&mut r, &[unit_grid(a), unit_grid(b)], 12);
        let values = j.supports();
        let moral = brute_force_optimal(&SearchSpace::new(values.clone(), Mode::Moral, Rational::one()).unwrap(), &j, &any_optimum()).unwrap();
        let truthful = brute_force_optimal(&SearchSpace::new(values, Mode::Truthful, Rational::zero()).unwrap(), &j, &any_optimum()).unwrap();
        let la = lookahead(&j).unwrap();
        prop_assert!(moral.best_revenue >= truthful.best_revenue);
        prop_assert!(truthful.best_revenue >= la.revenue);
        prop_assert!(is_truthful(&la.mechanism).holds());
    }

    #[test]
    fn search_is_thread_count_independent(seed in any::<u64>()) {
        let j = random_joint(&mut rng(seed), &[unit_grid(3), unit_grid(3)], 12);
        let space = SearchSpace::new(j.supports(), Mode::Moral, Rational::new(1, 2)).unwrap();
        let one = brute_force_optimal(&space, &j, &SearchOptions { threads: Some(1), ..SearchOptions::default() }).unwrap();
        let two = brute_force_optimal(&space, &j, &SearchOptions { threads: Some(2), ..SearchOptions::default() }).unwrap();
        prop_assert_eq!(one.best_grid, two.best_grid);
        prop_assert_eq!(one.best_revenue, two.best_revenue);
        prop_assert_eq!(one.optima_count, two.optima_count);
    }

    #[test]
    fn closed_form_matches_search_on_regular_pairs(seed in any::<u64>(), a in 2usize..=3, b in 2usize..=3) {
        let mut r = rng(seed);
        let da = random_distribution(&mut r, a, 9);
        let db = random_distribution(&mut r, b, 9);
        prop_assume!(da.is_regular().unwrap().holds() && db.is_regular().unwrap().holds());
        let ds = [da, db];
        let j = product_joint(&ds).unwrap();
        let mg = myerson_grid(&ds).unwrap();
        prop_assert!(mg.q.is_monotone().unwrap().holds());
        let space = SearchSpace::new(ds.iter().map(|d| d.values()).collect(), Mode::Truthful, Rational::zero()).unwrap();
        let best = brute_force_optimal(&space, &j, &any_optimum()).unwrap();
        prop_assert_eq!(expected_revenue(&mg.mechanism, &j).unwrap(), best.best_revenue);
    }

    #[test]
    fn lift_is_monotone_in_revenue(seed in any::<u64>(), points in 3usize..=4) {
        let mut r = rng(seed);
        let d = DiscreteDistribution::uniform(points).unwrap();
        let m = loop {
            let m = ProfitMaximizer::new(random_grid(&mut r, 2, points), Rational::one());
            if check_alpha_moral(&m, &Rational::one()).moral {
                break m;
            }
        };
        let (out, trace) = lift(&m, &d).unwrap();
        prop_assert!(trace.is_non_decreasing());
        prop_assert!(is_truthful(&out).holds());
        prop_assert_eq!(trace.final_revenue, expected_revenue(&out, &product_joint(&[d.clone(), d]).unwrap()).unwrap());
    }
}

#[test]
fn scaled_second_price_revenue_grows_with_c() {
    let d = DiscreteDistribution::uniform(5).unwrap();
    let j = product_joint(&[d.clone(), d.clone()]).unwrap();
    let values = vec![d.values(); 2];
    let top = scaled_second_price(&Rational::one(), values.clone()).unwrap();
    let mut prev = None;
    for k in 0..=8 {
        let c = Rational::new(k, 8);
        let m = scaled_second_price(&c, values.clone()).unwrap();
        let rev = expected_revenue(&m, &j).unwrap();
        if let Some(p) = &prev {
            assert!(&rev >= p);
        }
        if k < 8 {
            assert!(dominance_check(&top, &m).unwrap().holds());
        }
        prev = Some(rev);
    }
}
