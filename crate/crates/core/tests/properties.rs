mod common;

use std::collections::HashSet;

use fairmatch::io::{instance_to_json, matching_to_csv, parse_instance, parse_matching};
use fairmatch::metrics::quintile_sizes;
use fairmatch::oracle::{enumerate_matchings, search_space};
use fairmatch::{compute_profile, compute_stats, objective, paper_scores, validate, Matching};
use proptest::prelude::*;

use common::{random_instance, Shape};

fn arb_matching(nr: usize, np: usize) -> impl Strategy<Value = Matching> {
    proptest::collection::vec(any::<bool>(), nr * np).prop_map(move |bits| {
        let pairs: Vec<(usize, usize)> = bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(k, _)| (k / np, k % np))
            .collect();
        Matching::from_assignments(nr, np, &pairs).unwrap()
    })
}

proptest! {
    #[test]
    fn objective_is_the_sum_of_paper_scores(seed in 0u64..10_000, m in arb_matching(5, 4)) {
        let shape = Shape { reviewers: (5, 5), papers: (4, 4), affinity_lo: -1.0, ..Shape::tiny() };
        let inst = random_instance(seed, shape);
        let total: f64 = paper_scores(&inst, &m).unwrap().iter().sum();
        prop_assert!((objective(&inst, &m).unwrap() - total).abs() <= 1e-12);
        let stats = compute_stats(&inst, &m, 0.0).unwrap();
        prop_assert!(stats.min_ps <= stats.mean_ps + 1e-12 && stats.mean_ps <= stats.max_ps + 1e-12);
        prop_assert!(stats.min_ra <= stats.max_ra);
    }

    #[test]
    fn profile_is_translation_equivariant(
        scores in proptest::collection::vec(-10.0f64..10.0, 5..60),
        shift in -5.0f64..5.0,
    ) {
        let a = compute_profile(&scores).unwrap();
        let moved: Vec<f64> = scores.iter().map(|s| s + shift).collect();
        let b = compute_profile(&moved).unwrap();
        let sizes = quintile_sizes(scores.len());
        for (k, (qa, qb)) in a.quintiles.iter().zip(&b.quintiles).enumerate() {
            prop_assert_eq!(qa.size, sizes[k]);
            prop_assert_eq!(qa.size, qb.size);
            let close = |x: f64, y: f64| (x + shift - y).abs() <= 1e-9;
            prop_assert!(close(qa.box_lo, qb.box_lo));
            prop_assert!(close(qa.box_hi, qb.box_hi));
            prop_assert!(close(qa.median, qb.median));
            prop_assert!(close(qa.whisker_lo, qb.whisker_lo));
            prop_assert!(close(qa.whisker_hi, qb.whisker_hi));
            prop_assert_eq!(qa.outliers.len(), qb.outliers.len());
        }
    }

    #[test]
    fn enumeration_is_valid_and_duplicate_free(seed in 0u64..10_000, lb in any::<bool>()) {
        let inst = random_instance(seed, Shape { lower_bounds: lb, ..Shape::tiny() });
        let all = enumerate_matchings(&inst).unwrap();
        prop_assert!(all.len() as f64 <= search_space(&inst));
        let mut seen = HashSet::new();
        for m in &all {
            prop_assert!(validate(&inst, m, 0, None, 0.0).unwrap().is_empty());
            prop_assert!(seen.insert(m.assignments()));
        }
    }

    #[test]
    fn files_round_trip(seed in 0u64..10_000, lb in any::<bool>()) {
        let inst = random_instance(seed, Shape { lower_bounds: lb, affinity_lo: -1.0, ..Shape::suite(lb) });
        let back = parse_instance(&instance_to_json(&inst).unwrap(), None).unwrap();
        prop_assert_eq!(&back, &inst);
        let m = fairmatch::solve_tpms(&inst, fairmatch::ScalingConfig::default()).unwrap();
        let (nr, np) = inst.shape();
        prop_assert_eq!(parse_matching(&matching_to_csv(&m), nr, np).unwrap(), m);
    }
}

#[test]
fn enumeration_counts_small_cases() {
    // Two reviewers with room for everything and two papers of coverage 1:
    // each paper picks either reviewer.
    let inst = fairmatch::Instance::from_rows(
        &[vec![0.1, 0.2], vec![0.3, 0.4]],
        vec![2, 2],
        None,
        vec![1, 1],
    )
    .unwrap();
    assert_eq!(enumerate_matchings(&inst).unwrap().len(), 4);
    let tight = inst.with_lower_bounds(vec![1, 1]).unwrap();
    assert_eq!(enumerate_matchings(&tight).unwrap().len(), 2);
}
