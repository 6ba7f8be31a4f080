use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{descend, grow, GrowParams, Node, Target};
use super::{check_width, Prediction, Predictor};
use crate::data::{Dataset, Matrix, Task};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtConfig {
    pub n_rounds: usize,
    pub depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
    /// Row fraction drawn without replacement per round (1.0 disables sampling).
    pub subsample: f64,
    pub seed: u64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        Self {
            n_rounds: 300,
            depth: 5,
            learning_rate: 0.1,
            min_leaf: 1,
            subsample: 1.0,
            seed: 0,
        }
    }
}

/// Gradient-boosted regression trees. Classification boosts one logistic
/// score per class (a single score for binary tasks).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gbt {
    task: Task,
    n_features: usize,
    n_classes: usize,
    learning_rate: f64,
    /// Initial score per boosted output.
    init: Vec<f64>,
    /// `trees[k]` are the rounds of output `k`.
    trees: Vec<Vec<Vec<Node>>>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn train_gbt(d: &Dataset, cfg: &GbtConfig) -> Result<Gbt> {
    if cfg.n_rounds == 0 {
        return Err(Error::invalid("n_rounds must be at least 1"));
    }
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate <= 1.0) {
        return Err(Error::invalid(format!(
            "learning rate {} outside (0, 1]",
            cfg.learning_rate
        )));
    }
    if !(cfg.subsample > 0.0 && cfg.subsample <= 1.0) {
        return Err(Error::invalid(format!("subsample {} outside (0, 1]", cfg.subsample)));
    }
    if cfg.depth == 0 || cfg.min_leaf == 0 {
        return Err(Error::invalid("depth and min_leaf must be at least 1"));
    }
    let n = d.n_rows();
    if n < 2 * cfg.min_leaf {
        return Err(Error::invalid(format!("{n} rows are too few for min_leaf {}", cfg.min_leaf)));
    }
    let params = GrowParams {
        max_depth: cfg.depth,
        min_leaf: cfg.min_leaf,
        n_try: d.n_features(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_sub = ((cfg.subsample * n as f64).round() as usize).clamp(2 * cfg.min_leaf, n);
    let draw_rows = |rng: &mut ChaCha8Rng| -> Vec<usize> {
        if n_sub == n {
            (0..n).collect()
        } else {
            let mut r = sample(rng, n, n_sub).into_vec();
            r.sort_unstable();
            r
        }
    };

    // Targets per boosted output: the raw target, or 0/1 class indicators.
    let outputs: Vec<Vec<f64>> = match d.task {
        Task::Regression => vec![d.target.clone()],
        Task::Binary => vec![(0..n).map(|i| (d.class_of(i) == 1) as u8 as f64).collect()],
        Task::Multiclass => (0..d.n_classes())
            .map(|c| (0..n).map(|i| (d.class_of(i) == c) as u8 as f64).collect())
            .collect(),
    };
    let classification = d.task.is_classification();
    let mut init = Vec::new();
    let mut trees = Vec::new();
    for y in &outputs {
        let mean = y.iter().sum::<f64>() / n as f64;
        let f0 = if classification {
            let q = mean.clamp(1e-6, 1.0 - 1e-6);
            (q / (1.0 - q)).ln()
        } else {
            mean
        };
        let mut score = vec![f0; n];
        let mut rounds = Vec::with_capacity(cfg.n_rounds);
        for _ in 0..cfg.n_rounds {
            let prob: Vec<f64> = if classification {
                score.iter().map(|&s| sigmoid(s)).collect()
            } else {
                Vec::new()
            };
            let resid: Vec<f64> = if classification {
                y.iter().zip(&prob).map(|(t, q)| t - q).collect()
            } else {
                y.iter().zip(&score).map(|(t, s)| t - s).collect()
            };
            let rows = draw_rows(&mut rng);
            let tree = grow(&d.features, rows, &Target::Values(&resid), &params, &mut rng, &mut |idx| {
                let g: f64 = idx.iter().map(|&i| resid[i]).sum();
                if classification {
                    let h: f64 = idx.iter().map(|&i| prob[i] * (1.0 - prob[i])).sum();
                    vec![g / h.max(1e-12)]
                } else {
                    vec![g / idx.len().max(1) as f64]
                }
            });
            for (i, s) in score.iter_mut().enumerate() {
                *s += cfg.learning_rate * descend(&tree, d.features.row(i))[0];
            }
            rounds.push(tree);
        }
        init.push(f0);
        trees.push(rounds);
    }
    Ok(Gbt {
        task: d.task,
        n_features: d.n_features(),
        n_classes: d.n_classes(),
        learning_rate: cfg.learning_rate,
        init,
        trees,
    })
}

impl Gbt {
    fn raw_scores(&self, row: &[f64]) -> Vec<f64> {
        self.init
            .iter()
            .zip(&self.trees)
            .map(|(f0, rounds)| f0 + self.learning_rate * rounds.iter().map(|t| descend(t, row)[0]).sum::<f64>())
            .collect()
    }
}

impl Predictor for Gbt {
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
        Ok(match self.task {
            Task::Regression => Prediction::Regression(rows.rows().map(|r| self.raw_scores(r)[0]).collect()),
            Task::Binary => Prediction::Proba(
                rows.rows()
                    .map(|r| {
                        let q = sigmoid(self.raw_scores(r)[0]);
                        vec![1.0 - q, q]
                    })
                    .collect(),
            ),
            Task::Multiclass => Prediction::Proba(
                rows.rows()
                    .map(|r| {
                        let q: Vec<f64> = self.raw_scores(r).into_iter().map(sigmoid).collect();
                        let z: f64 = q.iter().sum();
                        q.into_iter().map(|v| v / z).collect()
                    })
                    .collect(),
            ),
        })
    }
}
