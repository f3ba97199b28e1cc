use proptest::prelude::*;

use qgt_core::bch::build_parity_check;
use qgt_core::design::{make_plan, optimize_psi};
use qgt_core::graph::{BipartiteGraph, DegreeProfile};
use qgt_core::qgt::io::{plan_from_json, plan_to_json, results_from_json, results_to_json};
use qgt_core::qgt::{encode, peel_decode, SupportVector, TestPlan};
use qgt_core::sim::sample_support_seeded;

fn small_plan(n: usize, m: usize, r: usize, t: usize, seed: u64) -> TestPlan {
    let profile = DegreeProfile::from_lambda(&[0.0, 0.3, 0.7]).unwrap();
    let g = BipartiteGraph::sample(n, m, r, &profile, seed).unwrap();
    TestPlan::new(g, t).unwrap()
}

#[test]
fn planned_design_recovers_a_sparse_support() {
    let design = optimize_psi(2, 6).unwrap();
    let plan = make_plan(20_000, 20, &design).unwrap();
    let tp = TestPlan::sample(20_000, plan.m_nodes, plan.r, 2, &design.lambda_star, 11).unwrap();
    assert_eq!(tp.num_tests(), plan.m);
    // a handful of defectives against a budget sized for 20
    let x = SupportVector::new(20_000, vec![17, 4_000, 12_345, 19_999]).unwrap();
    let out = peel_decode(&tp, &encode(&tp, &x).unwrap(), None).unwrap();
    assert!(out.is_complete());
    assert_eq!(out.identified, x.defectives());
}

#[test]
fn files_round_trip_through_json() {
    let tp = small_plan(300, 20, 30, 2, 5);
    let back = plan_from_json(&plan_to_json(&tp)).unwrap();
    assert_eq!(back.measurement_matrix(), tp.measurement_matrix());
    let x = sample_support_seeded(300, 0.02, 9).unwrap();
    let y = encode(&tp, &x).unwrap();
    let y2 = results_from_json(&results_to_json(&y), &back).unwrap();
    assert_eq!(y2.values(), y.values());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bch_recovers_any_pattern_of_weight_at_most_t(
        t in 1usize..=4,
        r in 8usize..200,
        picks in prop::collection::btree_set(0usize..200, 0..=4),
    ) {
        let set: Vec<usize> = picks.into_iter().filter(|&i| i < r).take(t).collect();
        let h = build_parity_check(t, r).unwrap();
        prop_assert_eq!(h.decode(&h.syndrome_of(&set), set.len()).unwrap(), set);
    }

    #[test]
    fn decoder_never_reports_a_non_defective(
        seed in any::<u64>(),
        t in 1usize..=3,
        gamma in 0.005f64..0.3,
    ) {
        let tp = small_plan(400, 25, 40, t, seed);
        let x = sample_support_seeded(400, gamma, seed ^ 1).unwrap();
        let y = encode(&tp, &x).unwrap();
        let out = peel_decode(&tp, &y, None).unwrap();
        for v in &out.identified {
            prop_assert!(x.contains(*v));
        }
        if out.is_complete() {
            prop_assert_eq!(&out.identified[..], x.defectives());
        }
        // cumulative per round; a round may resolve only empty nodes
        prop_assert!(out.identified_per_iteration.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(
            out.identified_per_iteration.last().copied().unwrap_or(0),
            out.identified.len()
        );
    }
}
