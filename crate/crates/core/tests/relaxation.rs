mod common;

use fairmatch::fairir::build_local_fairness_lp;
use fairmatch::lp::{is_integral_value, solve_lp, vertex_check, LpStatus};
use fairmatch::oracle::brute_force_maximin;
use fairmatch::{objective, solve_tpms, ScalingConfig};
use proptest::prelude::*;

use common::{random_instance, two_tier, Shape};

fn six_by_eight() -> Shape {
    Shape {
        reviewers: (6, 6),
        papers: (8, 8),
        ..Shape::suite(false)
    }
}

#[test]
fn relaxation_without_fairness_is_integral_and_matches_flow() {
    for seed in 0..50 {
        let inst = random_instance(seed, six_by_eight());
        let lp = build_local_fairness_lp(&inst, f64::NEG_INFINITY).unwrap();
        let sol = solve_lp(&lp.program).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal, "seed {seed}");
        assert!(
            sol.values.iter().all(|&v| is_integral_value(v)),
            "seed {seed}"
        );
        let flow = solve_tpms(&inst, ScalingConfig::default()).unwrap();
        let exact = objective(&inst, &flow).unwrap();
        assert!(
            (sol.objective - exact).abs() <= 1e-6,
            "seed {seed}: {} vs {exact}",
            sol.objective
        );
    }
}

#[test]
fn two_tier_relaxation_above_maximin_is_infeasible() {
    let inst = two_tier();
    let (maximin, _) = brute_force_maximin(&inst).unwrap();
    assert!((maximin - 1.0).abs() < 1e-12);
    let at = solve_lp(&build_local_fairness_lp(&inst, maximin).unwrap().program).unwrap();
    assert_eq!(at.status, LpStatus::Optimal);
    let above = solve_lp(&build_local_fairness_lp(&inst, 1.01).unwrap().program).unwrap();
    assert_eq!(above.status, LpStatus::Infeasible);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    // Removing constraints can only raise the optimum.
    #[test]
    fn dropping_rows_never_lowers_the_optimum(seed in 0u64..10_000, pick in any::<u64>()) {
        let inst = random_instance(seed, Shape { reviewers: (3, 6), papers: (3, 6), ..Shape::suite(true) });
        let (lo, hi) = fairmatch::threshold::search_range(&inst);
        let lp = build_local_fairness_lp(&inst, lo + 0.3 * (hi - lo)).unwrap();
        let full = solve_lp(&lp.program).unwrap();
        prop_assume!(full.is_optimal());
        prop_assert!(vertex_check(&lp.program, &full.values).holds());
        let mut relaxed = lp.program.clone();
        let row = (pick % relaxed.num_rows() as u64) as usize;
        relaxed.drop_row(row).unwrap();
        let loose = solve_lp(&relaxed).unwrap();
        prop_assert!(loose.is_optimal());
        prop_assert!(loose.objective >= full.objective - 1e-7);
    }

    // Fixing a variable to its optimal value keeps the optimum.
    #[test]
    fn fixing_an_optimal_integral_value_keeps_the_optimum(seed in 0u64..10_000) {
        let inst = random_instance(seed, Shape { reviewers: (3, 6), papers: (3, 6), ..Shape::suite(false) });
        let mut program = build_local_fairness_lp(&inst, f64::NEG_INFINITY).unwrap().program;
        let sol = solve_lp(&program).unwrap();
        for (k, &v) in sol.values.iter().enumerate().take(4) {
            program.fix_variable(k, v.round() as u8).unwrap();
        }
        let again = solve_lp(&program).unwrap();
        prop_assert!((again.objective - sol.objective).abs() <= 1e-7);
    }
}
