mod common;

use common::*;
use gam_distill::fourier::{brute_force_wht, fit_surrogate, FeatureSet, FnValue, Mask, SurrogateConfig};
use gam_distill::synthetic::gen_fourier_sparse;

#[test]
fn exact_support_for_random_three_sparse_functions() {
    let (exact, worst) = sparse_recovery_trials(30);
    assert!(exact >= 28, "exact support in {exact}/30 seeds");
    assert!(worst < 1e-6, "coefficient error {worst}");
}

#[test]
fn surrogate_agrees_with_full_transform_on_eight_features() {
    for seed in 0..5 {
        let truth = random_sparse(8, 3, 3, &mut rng(50 + seed));
        let table: Vec<f64> = (0..256u64).map(|b| sparse_eval(&truth, Mask::new(b, 8).unwrap())).collect();
        let full = brute_force_wht(&table).unwrap();
        let f = FnValue::new(8, |m: Mask| sparse_eval(&truth, m));
        let s = fit_surrogate(&f, &SurrogateConfig { seed, ..SurrogateConfig::default() }).unwrap();
        for (b, c) in full.iter().enumerate() {
            let got = s.coefficient(FeatureSet::from_bits(b as u64));
            assert!((got - c).abs() < 1e-6, "seed {seed} S={b:b}: {got} vs {c}");
        }
    }
}

#[test]
fn generated_tasks_tabulate_to_their_spectrum() {
    let task = gen_fourier_sparse(8, 4, 0.0, 20, 5, 3).unwrap();
    let truth = task.truth();
    let table: Vec<f64> = (0..256u64).map(|b| truth.eval(Mask::new(b, 8).unwrap()).unwrap()).collect();
    let full = brute_force_wht(&table).unwrap();
    for (b, c) in full.iter().enumerate() {
        assert!((truth.coefficient(FeatureSet::from_bits(b as u64)) - c).abs() < 1e-9);
    }
}
