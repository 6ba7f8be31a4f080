use super::{check_width, Prediction, Predictor};
use crate::data::{Dataset, Matrix, Task};
use crate::error::{Error, Result};

/// Distance-weighted k-nearest neighbours on standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct Knn {
    k: usize,
    task: Task,
    n_classes: usize,
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// Standardized training rows.
    x: Matrix,
    y: Vec<f64>,
}

pub fn train_knn(d: &Dataset, k: usize) -> Result<Knn> {
    let n = d.n_rows();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} must lie in [1, {n}]")));
    }
    let p = d.n_features();
    let mut mean = vec![0.0; p];
    let mut scale = vec![0.0; p];
    for j in 0..p {
        let m = d.features.column(j).sum::<f64>() / n as f64;
        let v = d.features.column(j).map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
        mean[j] = m;
        scale[j] = if v > 1e-24 { v.sqrt() } else { 1.0 };
    }
    let mut x = d.features.clone();
    for i in 0..n {
        for (j, v) in x.row_mut(i).iter_mut().enumerate() {
            *v = (*v - mean[j]) / scale[j];
        }
    }
    Ok(Knn {
        k,
        task: d.task,
        n_classes: d.n_classes(),
        mean,
        scale,
        x,
        y: d.target.clone(),
    })
}

impl Knn {
    fn predict_row(&self, row: &[f64]) -> Vec<f64> {
        let q: Vec<f64> = row
            .iter()
            .enumerate()
            .map(|(j, v)| (v - self.mean[j]) / self.scale[j])
            .collect();
        let mut dist: Vec<(f64, usize)> = self
            .x
            .rows()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(), i))
            .collect();
        dist.select_nth_unstable_by(self.k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut nn = dist[..self.k].to_vec();
        nn.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        // Exact matches dominate: they vote alone with equal weight.
        let exact: Vec<usize> = nn.iter().filter(|(d, _)| *d == 0.0).map(|&(_, i)| i).collect();
        let weighted: Vec<(f64, usize)> = if exact.is_empty() {
            nn.iter().map(|&(d, i)| (1.0 / d, i)).collect()
        } else {
            exact.iter().map(|&i| (1.0, i)).collect()
        };
        let total: f64 = weighted.iter().map(|w| w.0).sum();
        if self.task.is_classification() {
            let mut votes = vec![0.0; self.n_classes];
            for &(w, i) in &weighted {
                votes[self.y[i] as usize] += w / total;
            }
            votes
        } else {
            vec![weighted.iter().map(|&(w, i)| w * self.y[i]).sum::<f64>() / total]
        }
    }
}

impl Predictor for Knn {
    fn task(&self) -> Task {
        self.task
    }

    fn n_features(&self) -> usize {
        self.mean.len()
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict(&self, rows: &Matrix) -> Result<Prediction> {
        check_width(rows, self.mean.len())?;
        let out: Vec<Vec<f64>> = rows.rows().map(|r| self.predict_row(r)).collect();
        Ok(if self.task.is_classification() {
            Prediction::Proba(out)
        } else {
            Prediction::Regression(out.into_iter().map(|v| v[0]).collect())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_match_returns_label() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| (i * 3) as f64 + 0.5).collect();
        let d = Dataset::from_parts(Matrix::from_rows(&rows).unwrap(), y.clone(), Task::Regression).unwrap();
        let m = train_knn(&d, 5).unwrap();
        assert_eq!(m.predict(&d.features).unwrap(), Prediction::Regression(y));
    }

    #[test]
    fn k_bounds() {
        let d = Dataset::from_parts(Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap(), vec![0.0, 1.0], Task::Binary)
            .unwrap();
        assert!(train_knn(&d, 3).is_err());
        assert!(train_knn(&d, 0).is_err());
        let m = train_knn(&d, 2).unwrap();
        let q = Matrix::from_rows(&[vec![0.25]]).unwrap();
        match m.predict(&q).unwrap() {
            Prediction::Proba(p) => assert!((p[0][0] - 0.75).abs() < 1e-12),
            _ => panic!(),
        }
    }
}
