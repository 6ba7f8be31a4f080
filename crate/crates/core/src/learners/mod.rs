//! Teacher and student predictors.
//!
//! Every learner is fitted to a [`Dataset`] and exposes the [`Predictor`]
//! contract: regression values, or class-probability rows summing to one.

mod forest;
mod gbt;
mod knn;
mod ridge;
mod tree;

pub mod external;
pub mod protocol;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Matrix, Task};
use crate::error::{Error, Result};

pub use external::{ExternalConfig, ExternalTeacher};
pub use forest::{train_forest, Forest, ForestConfig};
pub use gbt::{train_gbt, Gbt, GbtConfig};
pub use knn::{train_knn, Knn};
pub use ridge::{train_ridge_cv, RidgeModel, DEFAULT_ALPHAS};
pub use tree::{train_cart, CartConfig, DecisionTree, Node};

/// Output of a predictor over a batch of rows.
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Regression(Vec<f64>),
    /// One probability row per input row.
    Proba(Vec<Vec<f64>>),
}

impl Prediction {
    pub fn len(&self) -> usize {
        match self {
            Prediction::Regression(v) => v.len(),
            Prediction::Proba(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Point predictions: the value for regression, the argmax class otherwise.
    pub fn point(&self) -> Vec<f64> {
        match self {
            Prediction::Regression(v) => v.clone(),
            Prediction::Proba(p) => p.iter().map(|row| argmax(row) as f64).collect(),
        }
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (c, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = c;
        }
    }
    best
}

/// A fitted model that can be queried on rows with the training feature count.
pub trait Predictor: Send + Sync {
    fn task(&self) -> Task;
    fn n_features(&self) -> usize;
    /// Number of classes, 0 for regression.
    fn n_classes(&self) -> usize;
    fn predict(&self, rows: &Matrix) -> Result<Prediction>;
}

pub(crate) fn check_width(rows: &Matrix, p: usize) -> Result<()> {
    if rows.n_cols() != p {
        return Err(Error::invalid(format!(
            "rows have {} features, model expects {p}",
            rows.n_cols()
        )));
    }
    Ok(())
}

/// Class distribution of a set of rows, by code.
pub(crate) fn class_distribution(d: &Dataset, idx: &[usize]) -> Vec<f64> {
    let mut counts = vec![0.0; d.n_classes()];
    for &i in idx {
        counts[d.class_of(i)] += 1.0;
    }
    let n = idx.len().max(1) as f64;
    counts.iter_mut().for_each(|c| *c /= n);
    counts
}

/// Built-in learner choice with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase", deny_unknown_fields)]
pub enum LearnerSpec {
    Gbt(GbtConfig),
    Forest(ForestConfig),
    Cart(CartConfig),
    Ridge {
        #[serde(default = "default_alphas")]
        alphas: Vec<f64>,
    },
    Knn {
        #[serde(default = "default_k")]
        k: usize,
    },
    /// Predicts the training-target mean (or class frequencies).
    Echo,
}

fn default_alphas() -> Vec<f64> {
    DEFAULT_ALPHAS.to_vec()
}

fn default_k() -> usize {
    5
}

impl LearnerSpec {
    /// Parses a bare learner name with default hyperparameters.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name.to_ascii_lowercase().as_str() {
            "gbt" => LearnerSpec::Gbt(GbtConfig::default()),
            "forest" | "rf" => LearnerSpec::Forest(ForestConfig::default()),
            "cart" | "tree" => LearnerSpec::Cart(CartConfig::default()),
            "ridge" => LearnerSpec::Ridge { alphas: default_alphas() },
            "knn" => LearnerSpec::Knn { k: default_k() },
            "echo" => LearnerSpec::Echo,
            other => return Err(Error::Config(format!("unknown learner `{other}`"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            LearnerSpec::Gbt(_) => "gbt",
            LearnerSpec::Forest(_) => "forest",
            LearnerSpec::Cart(_) => "cart",
            LearnerSpec::Ridge { .. } => "ridge",
            LearnerSpec::Knn { .. } => "knn",
            LearnerSpec::Echo => "echo",
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            LearnerSpec::Gbt(c) => c.seed = seed,
            LearnerSpec::Forest(c) => c.seed = seed,
            LearnerSpec::Cart(c) => c.seed = seed,
            _ => {}
        }
        self
    }

    pub fn fit(&self, d: &Dataset) -> Result<Box<dyn Predictor>> {
        Ok(match self {
            LearnerSpec::Gbt(c) => Box::new(train_gbt(d, c)?),
            LearnerSpec::Forest(c) => Box::new(train_forest(d, c)?),
            LearnerSpec::Cart(c) => Box::new(train_cart(d, c)?),
            LearnerSpec::Ridge { alphas } => Box::new(train_ridge_cv(d, alphas)?),
            LearnerSpec::Knn { k } => Box::new(train_knn(d, *k)?),
            LearnerSpec::Echo => Box::new(Echo::fit(d)?),
        })
    }
}

/// Constant predictor: training mean for regression, class frequencies otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Echo {
    task: Task,
    p: usize,
    output: Vec<f64>,
}

impl Echo {
    pub fn fit(d: &Dataset) -> Result<Self> {
        if d.n_rows() == 0 {
            return Err(Error::data("cannot fit on an empty dataset"));
        }
        let output = if d.task.is_classification() {
            let idx: Vec<usize> = (0..d.n_rows()).collect();
            class_distribution(d, &idx)
        } else {
            vec![d.target_moments().0]
        };
        Ok(Self {
            task: d.task,
            p: d.n_features(),
            output,
        })
    }
}

impl Predictor for Echo {
    fn task(&self) -> Task {
        self.task
    }

    fn n_features(&self) -> usize {
        self.p
    }

    fn n_classes(&self) -> usize {
        if self.task.is_classification() {
            self.output.len()
        } else {
            0
        }
    }

    fn predict(&self, rows: &Matrix) -> Result<Prediction> {
        check_width(rows, self.p)?;
        let n = rows.n_rows();
        Ok(if self.task.is_classification() {
            Prediction::Proba(vec![self.output.clone(); n])
        } else {
            Prediction::Regression(vec![self.output[0]; n])
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_predicts_mean() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let d = Dataset::from_parts(x.clone(), vec![1.0, 2.0, 6.0], Task::Regression).unwrap();
        let e = Echo::fit(&d).unwrap();
        assert_eq!(e.predict(&x).unwrap(), Prediction::Regression(vec![3.0; 3]));
    }

    #[test]
    fn learner_spec_json() {
        let s: LearnerSpec = serde_json::from_str(r#"{"name":"knn","k":3}"#).unwrap();
        assert_eq!(s, LearnerSpec::Knn { k: 3 });
        let s: LearnerSpec = serde_json::from_str(r#"{"name":"gbt"}"#).unwrap();
        assert_eq!(s, LearnerSpec::Gbt(GbtConfig::default()));
        assert!(serde_json::from_str::<LearnerSpec>(r#"{"name":"knn","q":3}"#).is_err());
        assert!(LearnerSpec::from_name("svm").is_err());
    }
}
