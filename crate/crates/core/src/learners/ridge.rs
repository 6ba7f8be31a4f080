use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_width, Prediction, Predictor};
use crate::data::{Dataset, Matrix, Task};
use crate::error::{Error, Result};
use crate::linalg::solve_symmetric;

pub const DEFAULT_ALPHAS: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];
const FOLDS: usize = 5;

/// Linear model with an unpenalized intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub alpha: f64,
    /// Mean validation MSE per candidate alpha, in grid order.
    pub cv_mse: Vec<f64>,
}

fn fit_closed_form(x: &Matrix, y: &[f64], rows: &[usize], alpha: f64) -> Result<(f64, Vec<f64>)> {
    let p = x.n_cols();
    let n = rows.len() as f64;
    let mut mx = vec![0.0; p];
    let mut my = 0.0;
    for &i in rows {
        for (m, v) in mx.iter_mut().zip(x.row(i)) {
            *m += v / n;
        }
        my += y[i] / n;
    }
    let mut a = DMatrix::<f64>::zeros(p, p);
    let mut b = DVector::<f64>::zeros(p);
    for &i in rows {
        let r = x.row(i);
        for j in 0..p {
            let cj = r[j] - mx[j];
            b[j] += cj * (y[i] - my);
            for k in j..p {
                a[(j, k)] += cj * (r[k] - mx[k]);
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            a[(j, k)] = a[(k, j)];
        }
        a[(j, j)] += alpha;
    }
    let beta = solve_symmetric(a, &b).ok_or_else(|| Error::Numerical("ridge system is singular".into()))?;
    let coef: Vec<f64> = beta.iter().copied().collect();
    let intercept = my - coef.iter().zip(&mx).map(|(c, m)| c * m).sum::<f64>();
    Ok((intercept, coef))
}

/// Ridge regression with the penalty chosen by 5-fold cross-validation
/// (fold of row `i` is `i mod 5`), refitted on all rows.
pub fn train_ridge_cv(d: &Dataset, alphas: &[f64]) -> Result<RidgeModel> {
    if d.task != Task::Regression {
        return Err(Error::invalid("ridge requires a regression task"));
    }
    let n = d.n_rows();
    if n < FOLDS {
        return Err(Error::invalid(format!("ridge cross-validation needs at least {FOLDS} rows, got {n}")));
    }
    if alphas.is_empty() || alphas.iter().any(|a| !(*a >= 0.0)) {
        return Err(Error::invalid("alpha grid must be non-empty and non-negative"));
    }
    let mut cv_mse = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let mut total = 0.0;
        for fold in 0..FOLDS {
            let train: Vec<usize> = (0..n).filter(|i| i % FOLDS != fold).collect();
            let (b0, coef) = fit_closed_form(&d.features, &d.target, &train, alpha)?;
            let val: Vec<usize> = (0..n).filter(|i| i % FOLDS == fold).collect();
            let mse = val
                .iter()
                .map(|&i| {
                    let pred = b0 + coef.iter().zip(d.features.row(i)).map(|(c, v)| c * v).sum::<f64>();
                    (pred - d.target[i]).powi(2)
                })
                .sum::<f64>()
                / val.len() as f64;
            total += mse;
        }
        cv_mse.push(total / FOLDS as f64);
    }
    let best = (0..alphas.len()).fold(0, |b, i| if cv_mse[i] < cv_mse[b] { i } else { b });
    let all: Vec<usize> = (0..n).collect();
    let (intercept, coefficients) = fit_closed_form(&d.features, &d.target, &all, alphas[best])?;
    Ok(RidgeModel {
        intercept,
        coefficients,
        alpha: alphas[best],
        cv_mse,
    })
}

impl Predictor for RidgeModel {
    fn task(&self) -> Task {
        Task::Regression
    }

    fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    fn n_classes(&self) -> usize {
        0
    }

    fn predict(&self, rows: &Matrix) -> Result<Prediction> {
        check_width(rows, self.coefficients.len())?;
        Ok(Prediction::Regression(
            rows.rows()
                .map(|r| self.intercept + self.coefficients.iter().zip(r).map(|(c, v)| c * v).sum::<f64>())
                .collect(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_linear_data() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 5.0, ((i * 7) % 11) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 3.0 * r[0] + 1.0).collect();
        let d = Dataset::from_parts(Matrix::from_rows(&rows).unwrap(), y, Task::Regression).unwrap();
        let m = train_ridge_cv(&d, &DEFAULT_ALPHAS).unwrap();
        assert!((m.coefficients[0] - 3.0).abs() < 0.01, "{:?}", m.coefficients);
        assert_eq!(m.alpha, 0.01);
        assert_eq!(m.cv_mse.len(), 5);
    }

    #[test]
    fn rejects_small_or_classification_data() {
        let rows: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let d = Dataset::from_parts(Matrix::from_rows(&rows).unwrap(), vec![0.0, 1.0, 2.0, 3.0], Task::Regression)
            .unwrap();
        assert!(train_ridge_cv(&d, &DEFAULT_ALPHAS).is_err());
        let d = Dataset::from_parts(Matrix::from_rows(&rows).unwrap(), vec![0.0, 1.0, 0.0, 1.0], Task::Binary).unwrap();
        assert!(train_ridge_cv(&d, &DEFAULT_ALPHAS).is_err());
    }
}
