//! Synthetic tasks with known interaction structure: sparse parity sums on
//! binary features, and tree-teacher relabelings of a Gaussian-cluster
//! classification problem.

use nalgebra::DMatrix;
use rand::seq::{index::sample, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{split, Dataset, Matrix, Task};
use crate::error::{Error, Result};
use crate::fourier::{chi, FeatureSet, FourierSurrogate};
use crate::learners::{train_cart, CartConfig, DecisionTree, Predictor};

/// Largest subset size drawn for a sparse parity task.
pub const MAX_GENERATING_ORDER: usize = 3;

/// `y = Σ c_i χ_{S_i}(x) + ε` on Bernoulli(1/2) bits, with its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierTask {
    pub n: usize,
    pub k: usize,
    pub sigma: f64,
    /// Generating subsets; the first is always the empty set.
    pub subsets: Vec<FeatureSet>,
    pub coefficients: Vec<f64>,
    pub train: Dataset,
    pub test: Dataset,
    pub seed: u64,
}

impl FourierTask {
    /// The noiseless generating function as a surrogate over the `n` bits.
    pub fn truth(&self) -> FourierSurrogate {
        FourierSurrogate::new(
            self.n,
            MAX_GENERATING_ORDER,
            self.subsets.iter().copied().zip(self.coefficients.iter().copied()).collect(),
        )
        .expect("generated terms are valid")
    }

    /// Noiseless value at a row of bits.
    pub fn signal(&self, row: &[f64]) -> f64 {
        let bits = bits_of(row);
        self.subsets
            .iter()
            .zip(&self.coefficients)
            .map(|(s, c)| c * chi(s.bits(), bits))
            .sum()
    }

    /// Generating subsets with at least two features.
    pub fn interactions(&self) -> Vec<FeatureSet> {
        self.subsets.iter().copied().filter(|s| s.len() >= 2).collect()
    }
}

pub(crate) fn bits_of(row: &[f64]) -> u64 {
    row.iter()
        .enumerate()
        .fold(0u64, |acc, (j, &v)| if v > 0.5 { acc | 1 << j } else { acc })
}

fn n_small_subsets(n: usize) -> usize {
    (0..=MAX_GENERATING_ORDER.min(n))
        .map(|s| (0..s).fold(1usize, |acc, i| acc * (n - i) / (i + 1)))
        .sum()
}

pub fn gen_fourier_sparse(n: usize, k: usize, sigma: f64, n_train: usize, n_test: usize, seed: u64) -> Result<FourierTask> {
    if !(3..=60).contains(&n) {
        return Err(Error::invalid(format!("feature count {n} outside [3, 60]")));
    }
    if k == 0 {
        return Err(Error::invalid("sparsity k must be at least 1"));
    }
    let family = n_small_subsets(n);
    if k > family {
        return Err(Error::invalid(format!(
            "sparsity {k} exceeds the {family} subsets of size at most {MAX_GENERATING_ORDER}"
        )));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("noise level {sigma} must be finite and non-negative")));
    }
    if n_train == 0 || n_test == 0 {
        return Err(Error::invalid("train and test sizes must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = FeatureSet::enumerate_up_to(n, MAX_GENERATING_ORDER);
    let mut subsets = vec![FeatureSet::EMPTY];
    let mut picks = sample(&mut rng, pool.len() - 1, k - 1).into_vec();
    picks.sort_unstable();
    subsets.extend(picks.into_iter().map(|i| pool[i + 1]));
    let coef = Normal::new(0.0, 2.0).expect("valid normal");
    let coefficients: Vec<f64> = (0..k).map(|_| coef.sample(&mut rng)).collect();

    let make = |m: usize, rng: &mut ChaCha8Rng| -> Result<Dataset> {
        let mut data = Vec::with_capacity(m * n);
        let mut y = Vec::with_capacity(m);
        for _ in 0..m {
            let bits: u64 = (0..n).fold(0, |acc, j| if rng.random::<bool>() { acc | 1 << j } else { acc });
            data.extend((0..n).map(|j| (bits >> j & 1) as f64));
            let clean: f64 = subsets.iter().zip(&coefficients).map(|(s, c)| c * chi(s.bits(), bits)).sum();
            let noise = if sigma > 0.0 {
                sigma * Distribution::<f64>::sample(&StandardNormal, rng)
            } else {
                0.0
            };
            y.push(clean + noise);
        }
        Dataset::from_parts(Matrix::new(m, n, data)?, y, Task::Regression)
    };
    let train = make(n_train, &mut rng)?;
    let test = make(n_test, &mut rng)?;
    Ok(FourierTask {
        n,
        k,
        sigma,
        subsets,
        coefficients,
        train,
        test,
        seed,
    })
}

/// One cell of the sparse-parity experiment grids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioACell {
    pub experiment: u8,
    pub n: usize,
    pub k: usize,
    pub sigma: f64,
    pub n_train: usize,
    pub n_test: usize,
}

impl ScenarioACell {
    /// Number of parity functions on `n` bits.
    pub fn ambient_basis_size(&self) -> u64 {
        1u64 << self.n
    }
}

/// Experiment 1 (training size), 2 (noise level) and 3 (ambient dimension).
pub fn scenario_a_grids() -> [Vec<ScenarioACell>; 3] {
    let exp1 = [20, 50, 100, 200, 300, 500]
        .into_iter()
        .map(|n_train| ScenarioACell {
            experiment: 1,
            n: 10,
            k: 3,
            sigma: 0.5,
            n_train,
            n_test: 200,
        })
        .collect();
    let exp2 = [0.1, 0.3, 0.5, 1.0, 2.0]
        .into_iter()
        .map(|sigma| ScenarioACell {
            experiment: 2,
            n: 8,
            k: 3,
            sigma,
            n_train: 300,
            n_test: 200,
        })
        .collect();
    let exp3 = (1..=3)
        .map(|k| ScenarioACell {
            experiment: 3,
            n: 15,
            k,
            sigma: 0.3,
            n_train: 400,
            n_test: 200,
        })
        .collect();
    [exp1, exp2, exp3]
}

/// Two-class Gaussian-cluster data: two clusters per class in a `p_inf`-dim
/// latent space, rotated by a random orthonormal map into the first `p_inf`
/// features; the remaining features are independent noise.
pub fn gen_cluster_classification(n: usize, p: usize, p_inf: usize, seed: u64) -> Result<Dataset> {
    if n < 2 || p_inf == 0 || p_inf > p {
        return Err(Error::invalid(format!(
            "invalid sizes: n = {n}, p = {p}, p_inf = {p_inf}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let centers: Vec<Vec<f64>> = (0..4).map(|_| (0..p_inf).map(|_| 2.0 * gauss(&mut rng)).collect()).collect();
    let g = DMatrix::<f64>::from_fn(p_inf, p_inf, |_, _| gauss(&mut rng));
    let q = g.qr().q();
    let mut labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    labels.shuffle(&mut rng);
    let mut data = Vec::with_capacity(n * p);
    for &c in &labels {
        let center = &centers[2 * c + rng.random_range(0..2)];
        let latent: Vec<f64> = center.iter().map(|m| m + gauss(&mut rng)).collect();
        for a in 0..p_inf {
            data.push((0..p_inf).map(|b| q[(a, b)] * latent[b]).sum());
        }
        for _ in p_inf..p {
            data.push(gauss(&mut rng));
        }
    }
    let y = labels.into_iter().map(|c| c as f64).collect();
    Dataset::from_parts(Matrix::new(n, p, data)?, y, Task::Binary)
}

/// A decision-tree teacher and its pseudo-labelled 7:3 split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeTask {
    pub depth: usize,
    pub teacher: DecisionTree,
    /// Features with pseudo-labels as targets.
    pub train: Dataset,
    pub test: Dataset,
    pub original_train: Vec<f64>,
    pub original_test: Vec<f64>,
    pub seed: u64,
}

pub fn make_tree_task(d: &Dataset, depth: usize, seed: u64) -> Result<TreeTask> {
    if !d.task.is_classification() {
        return Err(Error::invalid("tree tasks need a classification dataset"));
    }
    let (train, test) = split(d, 0.7, seed)?;
    let teacher = train_cart(
        &train,
        &CartConfig {
            max_depth: depth,
            seed,
            ..Default::default()
        },
    )?;
    let relabel = |part: &Dataset| -> Result<Dataset> {
        let y = teacher.predict(&part.features)?.point();
        part.with_target(y)
    };
    Ok(TreeTask {
        depth,
        train: relabel(&train)?,
        test: relabel(&test)?,
        original_train: train.target.clone(),
        original_test: test.target.clone(),
        teacher,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::{brute_force_wht, eval_surrogate, Mask};

    #[test]
    fn noiseless_targets_match_truth() {
        let t = gen_fourier_sparse(10, 4, 0.0, 50, 20, 3).unwrap();
        assert_eq!(t.subsets[0], FeatureSet::EMPTY);
        let s = t.truth();
        for (row, y) in t.train.features.rows().zip(&t.train.target) {
            let m = Mask::new(bits_of(row), 10).unwrap();
            assert_eq!(eval_surrogate(&s, m).unwrap(), *y);
        }
    }

    #[test]
    fn k_one_is_constant() {
        let t = gen_fourier_sparse(5, 1, 0.0, 30, 10, 1).unwrap();
        assert_eq!(t.subsets, vec![FeatureSet::EMPTY]);
        assert!(t.train.target.iter().all(|&y| y == t.coefficients[0]));
        assert!(gen_fourier_sparse(3, 9, 0.0, 10, 10, 0).is_err());
        assert!(gen_fourier_sparse(3, 8, 0.0, 10, 10, 0).is_ok());
    }

    #[test]
    fn wht_recovers_generating_pairs() {
        let t = gen_fourier_sparse(8, 5, 0.0, 10, 10, 11).unwrap();
        let table: Vec<f64> = (0..256u64)
            .map(|m| {
                let row: Vec<f64> = (0..8).map(|j| (m >> j & 1) as f64).collect();
                t.signal(&row)
            })
            .collect();
        let coef = brute_force_wht(&table).unwrap();
        for (s, c) in t.subsets.iter().zip(&t.coefficients) {
            assert!((coef[s.bits() as usize] - c).abs() < 1e-9);
        }
        let nonzero = coef.iter().filter(|c| c.abs() > 1e-9).count();
        assert_eq!(nonzero, 5);
    }

    #[test]
    fn grids() {
        let [e1, e2, e3] = scenario_a_grids();
        assert_eq!(e1.len(), 6);
        assert!(e1.iter().all(|c| c.n_test == 200));
        assert_eq!(e2.len(), 5);
        assert_eq!(e3[0].ambient_basis_size(), 32_768);
        assert_eq!(e3.iter().map(|c| c.k).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn clusters_are_balanced_and_deterministic() {
        let a = gen_cluster_classification(101, 6, 4, 9).unwrap();
        let b = gen_cluster_classification(101, 6, 4, 9).unwrap();
        assert_eq!(a, b);
        let ones = a.target.iter().filter(|&&y| y == 1.0).count();
        assert!((ones as i64 - (101 - ones) as i64).abs() <= 1);
        assert!(gen_cluster_classification(10, 3, 4, 0).is_err());
    }

    #[test]
    fn tree_task_pseudo_labels() {
        let d = gen_cluster_classification(300, 6, 4, 2).unwrap();
        let t = make_tree_task(&d, 2, 5).unwrap();
        assert_eq!(t.train.n_rows(), 210);
        let again = t.teacher.predict(&t.train.features).unwrap().point();
        assert_eq!(again, t.train.target);
        assert!(t.teacher.depth() <= 2);
    }
}
