//! Thin wrappers over nalgebra dense solves.

use nalgebra::{DMatrix, DVector};

/// Solves a symmetric positive (semi-)definite system, falling back to LU and
/// then to an SVD pseudo-inverse when Cholesky fails.
pub(crate) fn solve_symmetric(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Some(ch.solve(b));
    }
    solve_general(a, b)
}

pub(crate) fn solve_general(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(x) = a.clone().lu().solve(b) {
        if x.iter().all(|v| v.is_finite()) {
            return Some(x);
        }
    }
    a.svd(true, true)
        .solve(b, 1e-12)
        .ok()
        .filter(|x| x.iter().all(|v| v.is_finite()))
}
