//! Independent reference computations and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use gam_distill::data::{Dataset, Matrix, Task};
use gam_distill::fourier::{FeatureSet, FourierSurrogate};
use gam_distill::indices::SetFunction;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Table of `2^n` uniform values in [-1, 1] indexed by subset bitmask.
pub fn random_table(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..1usize << n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn set_function(table: &[f64]) -> SetFunction {
    let n = table.len().trailing_zeros() as usize;
    SetFunction::new((0..n).collect(), table.to_vec()).unwrap()
}

fn sign(s: usize, t: usize) -> f64 {
    if (s & t).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `c_S = 2^-n Σ_T f(T) (-1)^{|S ∩ T|}` by direct summation.
pub fn naive_wht(table: &[f64]) -> Vec<f64> {
    let m = table.len();
    (0..m)
        .map(|s| (0..m).map(|t| table[t] * sign(s, t)).sum::<f64>() / m as f64)
        .collect()
}

/// The table's exact Fourier expansion as a surrogate.
pub fn exact_surrogate(table: &[f64]) -> FourierSurrogate {
    let n = table.len().trailing_zeros() as usize;
    let terms = naive_wht(table)
        .into_iter()
        .enumerate()
        .map(|(s, c)| (FeatureSet::from_bits(s as u64), c))
        .collect();
    FourierSurrogate::new(n, n, terms).unwrap()
}

/// `a(S) = Σ_{T ⊆ S} (-1)^{|S|-|T|} f(T)`.
pub fn naive_mobius(table: &[f64]) -> Vec<f64> {
    let m = table.len();
    (0..m)
        .map(|s| {
            (0..m)
                .filter(|t| t & !s == 0)
                .map(|t| {
                    let d = (s.count_ones() - t.count_ones()) % 2;
                    if d == 0 {
                        table[t]
                    } else {
                        -table[t]
                    }
                })
                .sum()
        })
        .collect()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Shapley values from the permutation-weight formula.
pub fn direct_shapley(table: &[f64]) -> Vec<f64> {
    let m = table.len();
    let n = m.trailing_zeros() as usize;
    (0..n)
        .map(|i| {
            (0..m)
                .filter(|t| t & (1 << i) == 0)
                .map(|t| {
                    let k = t.count_ones() as usize;
                    factorial(k) * factorial(n - k - 1) / factorial(n) * (table[t | 1 << i] - table[t])
                })
                .sum()
        })
        .collect()
}

/// Unweighted least-squares fit of `f(T) ≈ Σ_{S ⊆ T, |S| ≤ k} β_S` over all `T`.
pub fn fbii_wls_oracle(table: &[f64], k: usize) -> BTreeMap<FeatureSet, f64> {
    let m = table.len();
    let n = m.trailing_zeros() as usize;
    let cols: Vec<usize> = (0..m).filter(|s| s.count_ones() as usize <= k).collect();
    let x = DMatrix::from_fn(m, cols.len(), |t, j| if cols[j] & !t == 0 { 1.0 } else { 0.0 });
    let y = DVector::from_column_slice(table);
    let beta = (x.transpose() * &x).cholesky().unwrap().solve(&(x.transpose() * y));
    assert!(n <= 8);
    cols.iter()
        .zip(beta.iter())
        .map(|(&s, &b)| (FeatureSet::from_bits(s as u64), b))
        .collect()
}

/// Binary XOR task on two bits plus noise bits, labels in {0, 1}.
pub fn xor_dataset(n: usize, extra: usize, seed: u64, task: Task) -> Dataset {
    let mut r = rng(seed);
    let p = 2 + extra;
    let mut x = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..p).map(|_| r.random_range(0..2) as f64).collect();
        y.push(((row[0] as u8) ^ (row[1] as u8)) as f64);
        x.extend(row);
    }
    Dataset::from_parts(Matrix::new(n, p, x).unwrap(), y, task).unwrap()
}

/// Writes a dataset as CSV with columns `x0..` and `y`.
pub fn write_csv(path: &Path, d: &Dataset) {
    let mut s = String::new();
    let p = d.n_features();
    for j in 0..p {
        write!(s, "x{j},").unwrap();
    }
    s.push_str("y\n");
    for i in 0..d.n_rows() {
        for v in d.features.row(i) {
            write!(s, "{v},").unwrap();
        }
        writeln!(s, "{}", d.target[i]).unwrap();
    }
    std::fs::write(path, s).unwrap();
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_gam-distill")
}

/// `count` distinct non-empty subsets of order at most `max_order` with
/// coefficients of magnitude in [0.5, 2] and random sign.
pub fn random_sparse(p: usize, count: usize, max_order: usize, rng: &mut ChaCha8Rng) -> Vec<(FeatureSet, f64)> {
    let mut terms: Vec<(FeatureSet, f64)> = Vec::new();
    while terms.len() < count {
        let order = rng.random_range(1..=max_order);
        let mut idx: Vec<usize> = (0..p).collect();
        for i in 0..order {
            let j = rng.random_range(i..p);
            idx.swap(i, j);
        }
        let s = FeatureSet::of(&idx[..order]);
        if terms.iter().any(|t| t.0 == s) {
            continue;
        }
        let c = rng.random_range(0.5..2.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        terms.push((s, c));
    }
    terms
}

pub fn sparse_eval(terms: &[(FeatureSet, f64)], m: gam_distill::fourier::Mask) -> f64 {
    terms
        .iter()
        .map(|(s, c)| c * gam_distill::fourier::parity(*s, m).unwrap())
        .sum()
}

/// Seeds for which `fit_surrogate` finds the exact support of a random
/// 3-sparse function on p=10, plus the worst coefficient error among those.
pub fn sparse_recovery_trials(seeds: u64) -> (usize, f64) {
    use gam_distill::fourier::{fit_surrogate, FnValue, Mask, SurrogateConfig};
    let mut exact = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..seeds {
        let truth = random_sparse(10, 3, 3, &mut rng(1000 + seed));
        let f = FnValue::new(10, |m: Mask| sparse_eval(&truth, m));
        let cfg = SurrogateConfig { max_order: 3, budget: 500, seed, ..SurrogateConfig::default() };
        let s = fit_surrogate(&f, &cfg).unwrap();
        let found: std::collections::BTreeSet<FeatureSet> =
            s.terms().iter().filter(|(_, c)| c.abs() > 1e-9).map(|t| t.0).collect();
        let want: std::collections::BTreeSet<FeatureSet> = truth.iter().map(|t| t.0).collect();
        if found == want {
            exact += 1;
            for (set, c) in &truth {
                worst = worst.max((s.coefficient(*set) - c).abs());
            }
        }
    }
    (exact, worst)
}
