use nalgebra::{DMatrix, DVector};

use super::{binomial, IndexKind, IndexScores, SetFunction, MAX_FSII_FEATURES};
use crate::error::{Error, Result};
use crate::fourier::FeatureSet;

const FALLBACK_RIDGE: f64 = 1e-10;

/// Faith-Shapley interaction index of order `k`.
///
/// Fits the degree-`k` multilinear polynomial `p(T) = Σ_{W⊆T, |W|≤k} β_W` that
/// minimises the Shapley-kernel weighted squared error over all proper
/// non-empty coalitions, with `p(∅) = f(∅)` and `p(A) = f(A)` imposed exactly,
/// and reports the coefficients `β`.
pub fn fsii(f: &SetFunction, k: usize) -> Result<IndexScores> {
    let n = f.n();
    if n > MAX_FSII_FEATURES {
        return Err(Error::invalid(format!(
            "active set of {n} features exceeds the FSII limit of {MAX_FSII_FEATURES}"
        )));
    }
    if k == 0 {
        return Err(Error::invalid("FSII order must be at least 1"));
    }
    let k = k.min(n);
    let empty_value = f.value(0);
    let mut out = IndexScores::new(IndexKind::Fsii, k);
    out.scores.insert(f.to_global(0), empty_value);
    if n == 0 {
        return Ok(out);
    }

    let vars: Vec<u64> = FeatureSet::enumerate_up_to(n, k)
        .into_iter()
        .skip(1)
        .map(FeatureSet::bits)
        .collect();
    let m = vars.len();

    // Shapley kernel per coalition size; the endpoints carry the constraints instead.
    let kernel: Vec<f64> = (0..=n)
        .map(|t| {
            if t == 0 || t == n {
                0.0
            } else {
                (n - 1) as f64 / (binomial(n, t) * t as f64 * (n - t) as f64)
            }
        })
        .collect();
    // Total kernel mass of coalitions containing a fixed set of size u.
    let superset_mass: Vec<f64> = (0..=n)
        .map(|u| (u.max(1)..n).map(|t| binomial(n - u, t - u) * kernel[t]).sum())
        .collect();

    // Weighted right-hand side Σ_{T⊇W} μ(T) (f(T) − f(∅)) via a superset-sum sweep.
    let full = f.full();
    let mut g: Vec<f64> = (0..=full)
        .map(|t| kernel[t.count_ones() as usize] * (f.value(t) - empty_value))
        .collect();
    for i in 0..n {
        let bit = 1u64 << i;
        for t in 0..=full {
            if t & bit == 0 {
                g[t as usize] += g[(t | bit) as usize];
            }
        }
    }

    let dim = m + 1;
    let mut kkt = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    for (a, &wa) in vars.iter().enumerate() {
        for (b, &wb) in vars.iter().enumerate().skip(a) {
            let v = superset_mass[(wa | wb).count_ones() as usize];
            kkt[(a, b)] = v;
            kkt[(b, a)] = v;
        }
        kkt[(a, m)] = 1.0;
        kkt[(m, a)] = 1.0;
        rhs[a] = g[wa as usize];
    }
    rhs[m] = f.value(full) - empty_value;

    let beta = match kkt.clone().lu().solve(&rhs) {
        Some(x) if x.iter().all(|v| v.is_finite()) => x,
        _ => {
            log::warn!("FSII normal system is singular; adding a {FALLBACK_RIDGE:e} ridge");
            for a in 0..m {
                kkt[(a, a)] += FALLBACK_RIDGE;
            }
            kkt.lu()
                .solve(&rhs)
                .filter(|x| x.iter().all(|v| v.is_finite()))
                .ok_or_else(|| Error::Numerical("singular FSII normal system".into()))?
        }
    };
    for (a, &w) in vars.iter().enumerate() {
        out.scores.insert(f.to_global(w), beta[a]);
    }
    Ok(out)
}
