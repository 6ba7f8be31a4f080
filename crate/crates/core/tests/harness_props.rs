
use std::collections::BTreeMap;

use gam_distill::fourier::FeatureSet;
use gam_distill::harness::{
    overlap, rank_methods, run_scenario_a, summarize_scenario_a, Cache, Metric, MetricRecord, MetricReport,
    ScenarioAConfig, ScenarioALearner,
};
use gam_distill::synthetic::scenario_a_grids;
use proptest::prelude::*;

fn report(values: &[Vec<f64>], names: &[String]) -> MetricReport {
    let mut records = Vec::new();
    for (d, row) in values.iter().enumerate() {
        for (m, v) in row.iter().enumerate() {
            for (metric, scale) in [(Metric::R2, 1.0), (Metric::Mae, -1.0)] {
                records.push(MetricRecord {
                    dataset: format!("d{d}"),
                    method: names[m].clone(),
                    metric,
                    n_int: 1 + d % 2,
                    seed: 0,
                    value: scale * v,
                });
            }
        }
    }
    MetricReport { records, seeds: vec![0], timings: vec![] }
}

fn sets(bits: &[u64]) -> Vec<FeatureSet> {
    let mut out: Vec<FeatureSet> = Vec::new();
    for &b in bits {
        let s = FeatureSet::from_bits(b);
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

proptest! {
    #[test]
    fn rank_table_ignores_method_order(
        values in prop::collection::vec(prop::collection::vec(0i32..5, 4), 1..6),
        shift in 0usize..4,
    ) {
        let values: Vec<Vec<f64>> = values.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect();
        let names: Vec<String> = (0..4).map(|m| format!("m{m}")).collect();
        let a = rank_methods(&report(&values, &names)).unwrap();
        let mut rotated = names.clone();
        rotated.rotate_left(shift);
        let permuted: Vec<Vec<f64>> = values
            .iter()
            .map(|r| (0..4).map(|i| r[names.iter().position(|n| *n == rotated[i]).unwrap()]).collect())
            .collect();
        let b = rank_methods(&report(&permuted, &rotated)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn overlap_is_symmetric_and_one_only_on_equal_sets(
        a in prop::collection::vec(1u64..64, 8..12),
        b in prop::collection::vec(1u64..64, 8..12),
    ) {
        let (a, b) = (sets(&a), sets(&b));
        let (ab, _) = overlap(&a, &b);
        let (ba, _) = overlap(&b, &a);
        prop_assert_eq!(ab, ba);
        let ta: std::collections::BTreeSet<_> = a.iter().take(8).collect();
        let tb: std::collections::BTreeSet<_> = b.iter().take(8).collect();
        prop_assert_eq!(ab == 1.0, ta == tb);
        prop_assert_eq!(overlap(&a, &a).0, 1.0);
    }
}

#[test]
fn overlap_definition_examples() {
    let a = sets(&[1, 2, 3, 4, 5, 6, 7, 8]);
    let b = sets(&[1, 2, 3, 4, 5, 6, 9, 10]);
    assert_eq!(overlap(&a, &b), (0.75, false));
    assert_eq!(overlap(&a, &sets(&[11, 12, 13, 14, 15, 16, 17, 18])).0, 0.0);
}

#[test]
fn noise_degrades_every_learner() {
    let cfg = ScenarioAConfig { seeds: (0..20).collect(), ..ScenarioAConfig::default() };
    let rows = run_scenario_a(&scenario_a_grids()[1], &cfg, &Cache::disabled()).unwrap();
    assert_eq!(rows.len(), 5 * 5 * 20);
    let mut curves: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for s in summarize_scenario_a(&rows) {
        curves.entry(s.learner.clone()).or_default().push((s.x_value, s.mean));
    }
    assert_eq!(curves.len(), ScenarioALearner::ALL.len());
    for (learner, curve) in &curves {
        for w in curve.windows(2) {
            assert!(w[0].0 < w[1].0);
            assert!(w[1].1 < w[0].1, "{learner}: mean R2 {curve:?}");
        }
    }
}
