//! Tabular datasets: the encoded feature matrix, targets, and the helpers every
//! pipeline stage shares (splitting, binning, baseline rows).

mod binning;
mod csv_io;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use binning::{build_bins, BinningSpec, FeatureBins};
pub use csv_io::{load_csv, load_csv_from_reader};

/// Dense row-major matrix of reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::invalid(format!(
                "matrix shape {rows}x{cols} does not match {} values",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::invalid(format!(
                    "row {i} has {} values, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |i| self.data[i * self.cols + j])
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Binary,
    Multiclass,
}

impl Task {
    pub fn is_classification(self) -> bool {
        !matches!(self, Task::Regression)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Regression => "regression",
            Task::Binary => "binary",
            Task::Multiclass => "multiclass",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "regression" => Ok(Task::Regression),
            "binary" => Ok(Task::Binary),
            "multiclass" => Ok(Task::Multiclass),
            "classification" => Ok(Task::Multiclass),
            other => Err(Error::Config(format!("unknown task `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    /// Category labels indexed by code.
    Categorical { categories: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

impl Column {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Numeric,
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, ColumnKind::Categorical { .. })
    }
}

/// Encoded tabular dataset. Categorical features hold their ordinal codes,
/// classification targets hold class codes in `[0, n_classes)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Matrix,
    pub target: Vec<f64>,
    pub task: Task,
    pub columns: Vec<Column>,
    pub target_name: String,
    /// Class labels by code; empty for regression.
    pub class_labels: Vec<String>,
}

impl Dataset {
    /// Builds a dataset with numeric columns named `x0..`, validating shapes and codes.
    pub fn from_parts(features: Matrix, target: Vec<f64>, task: Task) -> Result<Self> {
        let columns = (0..features.n_cols())
            .map(|j| Column::numeric(format!("x{j}")))
            .collect();
        let class_labels = if task.is_classification() {
            let n = target.iter().fold(0.0f64, |m, &v| m.max(v)) as usize + 1;
            (0..n).map(|c| c.to_string()).collect()
        } else {
            Vec::new()
        };
        let d = Self {
            features,
            target,
            task,
            columns,
            target_name: "y".to_string(),
            class_labels,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.n_rows() != self.target.len() {
            return Err(Error::data(format!(
                "{} feature rows but {} targets",
                self.features.n_rows(),
                self.target.len()
            )));
        }
        if self.features.n_cols() != self.columns.len() {
            return Err(Error::data("column metadata does not match feature count"));
        }
        if self.features.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::data("non-finite feature value"));
        }
        if self.task.is_classification() {
            let k = self.n_classes() as f64;
            if self
                .target
                .iter()
                .any(|&y| y < 0.0 || y >= k || y.fract() != 0.0)
            {
                return Err(Error::data("class codes must be integers in [0, n_classes)"));
            }
        } else if self.target.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("non-finite regression target"));
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.features.n_rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_cols()
    }

    /// Number of classes; 0 for regression.
    pub fn n_classes(&self) -> usize {
        if self.task.is_classification() {
            self.class_labels.len()
        } else {
            0
        }
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn class_of(&self, i: usize) -> usize {
        self.target[i] as usize
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(idx),
            target: idx.iter().map(|&i| self.target[i]).collect(),
            task: self.task,
            columns: self.columns.clone(),
            target_name: self.target_name.clone(),
            class_labels: self.class_labels.clone(),
        }
    }

    /// Copy of this dataset with a replacement target vector.
    pub fn with_target(&self, target: Vec<f64>) -> Result<Dataset> {
        let d = Dataset {
            target,
            ..self.clone()
        };
        d.validate()?;
        Ok(d)
    }

    /// Mean and standard deviation of the target (std floored at a tiny value).
    pub fn target_moments(&self) -> (f64, f64) {
        let n = self.target.len().max(1) as f64;
        let mean = self.target.iter().sum::<f64>() / n;
        let var = self.target.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt().max(1e-12))
    }
}

/// Deterministic shuffled split. Classification splits are stratified per class.
pub fn split(d: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let n = d.n_rows();
    if n < 2 {
        return Err(Error::data(format!("cannot split {n} rows")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    if d.task.is_classification() {
        let mut by_class = vec![Vec::new(); d.n_classes()];
        for i in 0..n {
            by_class[d.class_of(i)].push(i);
        }
        for mut rows in by_class {
            rows.shuffle(&mut rng);
            let k = ((rows.len() as f64) * train_fraction).round() as usize;
            let k = k.min(rows.len());
            train.extend_from_slice(&rows[..k]);
            test.extend_from_slice(&rows[k..]);
        }
        // Both halves must be non-empty even when every class is tiny.
        if test.is_empty() {
            test.push(train.pop().expect("n >= 2"));
        } else if train.is_empty() {
            train.push(test.pop().expect("n >= 2"));
        }
        train.sort_unstable();
        test.sort_unstable();
    } else {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let k = ((n as f64) * train_fraction).round() as usize;
        let k = k.clamp(1, n - 1);
        train = idx[..k].to_vec();
        test = idx[k..].to_vec();
    }
    Ok((d.subset(&train), d.subset(&test)))
}

/// Reference row for masked-out features: numeric mean, categorical mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineVector(pub Vec<f64>);

impl BaselineVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn baseline_vector(train: &Dataset) -> Result<BaselineVector> {
    if train.n_rows() == 0 {
        return Err(Error::data("baseline of an empty dataset"));
    }
    let values = train
        .columns
        .iter()
        .enumerate()
        .map(|(j, col)| match &col.kind {
            ColumnKind::Numeric => {
                train.features.column(j).sum::<f64>() / train.n_rows() as f64
            }
            ColumnKind::Categorical { categories } => {
                let mut counts = vec![0usize; categories.len().max(1)];
                for v in train.features.column(j) {
                    let c = v as usize;
                    if c >= counts.len() {
                        counts.resize(c + 1, 0);
                    }
                    counts[c] += 1;
                }
                // max_by_key keeps the last maximum; scan manually for the smallest code.
                let mut best = 0;
                for (c, &k) in counts.iter().enumerate() {
                    if k > counts[best] {
                        best = c;
                    }
                }
                best as f64
            }
        })
        .collect();
    Ok(BaselineVector(values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize, task: Task) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let target = (0..n)
            .map(|i| if task.is_classification() { (i % 2) as f64 } else { i as f64 * 0.5 })
            .collect();
        Dataset::from_parts(Matrix::from_rows(&rows).unwrap(), target, task).unwrap()
    }

    #[test]
    fn split_two_to_one() {
        let d = toy(9, Task::Regression);
        let (a, b) = split(&d, 2.0 / 3.0, 1).unwrap();
        assert_eq!((a.n_rows(), b.n_rows()), (6, 3));
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let d = toy(40, Task::Regression);
        let (a1, b1) = split(&d, 0.7, 9).unwrap();
        let (a2, b2) = split(&d, 0.7, 9).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
        let mut all: Vec<f64> = a1.features.column(0).chain(b1.features.column(0)).collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..40).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn split_stratifies() {
        let d = toy(8, Task::Binary);
        let (a, b) = split(&d, 0.5, 3).unwrap();
        for half in [&a, &b] {
            let ones = half.target.iter().filter(|&&y| y == 1.0).count();
            assert_eq!(ones, 2);
            assert_eq!(half.n_rows(), 4);
        }
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let d = toy(8, Task::Regression);
        assert!(split(&d, 1.0, 0).is_err());
        assert!(split(&d, 0.0, 0).is_err());
    }

    #[test]
    fn baseline_mean_and_mode() {
        let feats = Matrix::from_rows(&[
            vec![1.0, 0.0, 7.0],
            vec![2.0, 0.0, 7.0],
            vec![3.0, 1.0, 7.0],
        ])
        .unwrap();
        let mut d = Dataset::from_parts(feats, vec![0.0; 3], Task::Regression).unwrap();
        d.columns[1].kind = ColumnKind::Categorical {
            categories: vec!["a".into(), "b".into()],
        };
        let b = baseline_vector(&d).unwrap();
        assert_eq!(b.0, vec![2.0, 0.0, 7.0]);
    }

    #[test]
    fn baseline_mode_ties_pick_smaller_code() {
        let feats = Matrix::from_rows(&[vec![1.0], vec![0.0]]).unwrap();
        let mut d = Dataset::from_parts(feats, vec![0.0; 2], Task::Regression).unwrap();
        d.columns[0].kind = ColumnKind::Categorical {
            categories: vec!["a".into(), "b".into()],
        };
        assert_eq!(baseline_vector(&d).unwrap().0, vec![0.0]);
    }
}
