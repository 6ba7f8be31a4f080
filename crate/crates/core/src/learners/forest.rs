use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{descend, fit_rows, CartConfig, DecisionTree};
use super::{check_width, Prediction, Predictor};
use crate::data::{Dataset, Matrix, Task};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub feature_fraction: f64,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 10,
            min_leaf: 1,
            feature_fraction: 0.5,
            bootstrap: true,
            seed: 0,
        }
    }
}

/// Bagged CART ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<DecisionTree>,
    task: Task,
    n_features: usize,
    n_classes: usize,
}

pub fn train_forest(d: &Dataset, cfg: &ForestConfig) -> Result<Forest> {
    if cfg.n_trees == 0 {
        return Err(Error::invalid("n_trees must be at least 1"));
    }
    let cart = CartConfig {
        max_depth: cfg.max_depth,
        min_leaf: cfg.min_leaf,
        feature_fraction: cfg.feature_fraction,
        seed: cfg.seed,
    };
    let n = d.n_rows();
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(t as u64 + 1);
            let rows: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_rows(d, rows, &cart, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Forest {
        trees,
        task: d.task,
        n_features: d.n_features(),
        n_classes: d.n_classes(),
    })
}

impl Predictor for Forest {
    fn task(&self) -> Task {
        self.task
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict(&self, rows: &Matrix) -> Result<Prediction> {
        check_width(rows, self.n_features)?;
        let width = if self.task.is_classification() { self.n_classes } else { 1 };
        let m = self.trees.len() as f64;
        let avg: Vec<Vec<f64>> = rows
            .rows()
            .map(|r| {
                let mut acc = vec![0.0; width];
                for t in &self.trees {
                    for (a, v) in acc.iter_mut().zip(descend(&t.nodes, r)) {
                        *a += v;
                    }
                }
                acc.iter_mut().for_each(|a| *a /= m);
                acc
            })
            .collect();
        Ok(if self.task.is_classification() {
            Prediction::Proba(avg)
        } else {
            Prediction::Regression(avg.into_iter().map(|v| v[0]).collect())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::train_cart;

    fn toy() -> Dataset {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 7) as f64, (i % 5) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| ((r[0] + r[1]) > 5.0) as u8 as f64).collect();
        Dataset::from_parts(Matrix::from_rows(&rows).unwrap(), y, Task::Binary).unwrap()
    }

    #[test]
    fn single_unbagged_tree_equals_cart() {
        let d = toy();
        let cfg = ForestConfig {
            n_trees: 1,
            feature_fraction: 1.0,
            bootstrap: false,
            max_depth: 4,
            ..Default::default()
        };
        let f = train_forest(&d, &cfg).unwrap();
        let t = train_cart(&d, &CartConfig { max_depth: 4, ..Default::default() }).unwrap();
        assert_eq!(f.predict(&d.features).unwrap(), t.predict(&d.features).unwrap());
    }

    #[test]
    fn deterministic_and_normalized() {
        let d = toy();
        let cfg = ForestConfig { n_trees: 20, seed: 3, ..Default::default() };
        let a = train_forest(&d, &cfg).unwrap().predict(&d.features).unwrap();
        let b = train_forest(&d, &cfg).unwrap().predict(&d.features).unwrap();
        assert_eq!(a, b);
        if let Prediction::Proba(p) = a {
            assert!(p.iter().all(|r| (r.iter().sum::<f64>() - 1.0).abs() < 1e-9));
        }
    }
}
