use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{chi, full_bits, FeatureSet, Mask};
use crate::error::{Error, Result};
use crate::linalg::solve_symmetric;

/// Feature-count ceiling for surrogate fitting (the enumerated basis grows as C(p, <=K)).
pub const MAX_SURROGATE_FEATURES: usize = 30;

/// A scalar function of feature masks that can be queried in batches.
///
/// Implementations must return one value per mask, in order.
pub trait ValueFunction: Sync {
    fn n_features(&self) -> usize;
    fn evaluate(&self, masks: &[Mask]) -> Result<Vec<f64>>;
}

/// Adapts a plain closure `Fn(Mask) -> f64` over `p` features.
pub struct FnValue<F> {
    pub n_features: usize,
    pub f: F,
}

impl<F> FnValue<F>
where
    F: Fn(Mask) -> f64 + Sync,
{
    pub fn new(n_features: usize, f: F) -> Self {
        Self { n_features, f }
    }
}

impl<F> ValueFunction for FnValue<F>
where
    F: Fn(Mask) -> f64 + Sync,
{
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn evaluate(&self, masks: &[Mask]) -> Result<Vec<f64>> {
        Ok(masks.iter().map(|&m| (self.f)(m)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    /// Highest subset order in the enumerated basis.
    pub max_order: usize,
    /// Number of masks drawn (before de-duplication).
    pub budget: usize,
    pub max_support: usize,
    /// Ridge penalty on non-constant coefficients in the final refit.
    pub ridge: f64,
    /// Minimum decrease of the residual norm for matching pursuit to keep going.
    pub tolerance: f64,
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            max_order: 3,
            budget: 500,
            max_support: 20,
            ridge: 1e-6,
            tolerance: 1e-8,
            holdout_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// R² of the support chosen on the training masks, scored on held-out masks.
    pub holdout_r2: Option<f64>,
    /// Distinct masks sent to the value function.
    pub queries: usize,
    pub budget: usize,
    pub basis_size: usize,
}

/// Sparse parity expansion `f(m) = sum_{S in support} F(S) chi_S(m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SurrogateRepr", into = "SurrogateRepr")]
pub struct FourierSurrogate {
    p: usize,
    max_order: usize,
    terms: Vec<(FeatureSet, f64)>,
    pub diagnostics: FitDiagnostics,
}

#[derive(Serialize, Deserialize)]
struct SurrogateRepr {
    p: usize,
    #[serde(rename = "K")]
    max_order: usize,
    support: Vec<FeatureSet>,
    coefficients: Vec<f64>,
    #[serde(default)]
    diagnostics: FitDiagnostics,
}

impl TryFrom<SurrogateRepr> for FourierSurrogate {
    type Error = Error;

    fn try_from(r: SurrogateRepr) -> Result<Self> {
        if r.support.len() != r.coefficients.len() {
            return Err(Error::invalid("support and coefficient lengths differ"));
        }
        let mut s = FourierSurrogate::new(
            r.p,
            r.max_order,
            r.support.into_iter().zip(r.coefficients).collect(),
        )?;
        s.diagnostics = r.diagnostics;
        Ok(s)
    }
}

impl From<FourierSurrogate> for SurrogateRepr {
    fn from(s: FourierSurrogate) -> Self {
        SurrogateRepr {
            p: s.p,
            max_order: s.max_order,
            support: s.terms.iter().map(|t| t.0).collect(),
            coefficients: s.terms.iter().map(|t| t.1).collect(),
            diagnostics: s.diagnostics,
        }
    }
}

impl FourierSurrogate {
    pub fn new(p: usize, max_order: usize, terms: Vec<(FeatureSet, f64)>) -> Result<Self> {
        if p > super::MAX_FEATURES {
            return Err(Error::invalid(format!("{p} features exceeds {}", super::MAX_FEATURES)));
        }
        let mut seen = HashSet::new();
        for &(s, c) in &terms {
            if !seen.insert(s) {
                return Err(Error::invalid(format!("duplicate support subset {s}")));
            }
            if s.len() > max_order {
                return Err(Error::invalid(format!("subset {s} exceeds order {max_order}")));
            }
            if s.span() > p {
                return Err(Error::invalid(format!("subset {s} out of range for {p} features")));
            }
            if !c.is_finite() {
                return Err(Error::invalid(format!("non-finite coefficient on {s}")));
            }
        }
        Ok(Self {
            p,
            max_order,
            terms,
            diagnostics: FitDiagnostics::default(),
        })
    }

    pub fn n_features(&self) -> usize {
        self.p
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn terms(&self) -> &[(FeatureSet, f64)] {
        &self.terms
    }

    pub fn support(&self) -> impl Iterator<Item = FeatureSet> + '_ {
        self.terms.iter().map(|t| t.0)
    }

    pub fn coefficient(&self, s: FeatureSet) -> f64 {
        self.terms.iter().find(|t| t.0 == s).map_or(0.0, |t| t.1)
    }

    /// Union of all support subsets.
    pub fn active_features(&self) -> FeatureSet {
        self.terms.iter().fold(FeatureSet::EMPTY, |acc, t| acc.union(t.0))
    }

    pub fn eval(&self, m: Mask) -> Result<f64> {
        if m.len() != self.p {
            return Err(Error::invalid(format!(
                "mask length {} does not match {} features",
                m.len(),
                self.p
            )));
        }
        Ok(self.eval_bits(m.bits()))
    }

    pub(crate) fn eval_bits(&self, bits: u64) -> f64 {
        self.terms.iter().map(|&(s, c)| c * chi(s.bits(), bits)).sum()
    }
}

/// Exact value of the surrogate at a mask.
pub fn eval_surrogate(s: &FourierSurrogate, m: Mask) -> Result<f64> {
    s.eval(m)
}

/// Fits a sparse Fourier surrogate to `value_fn` from randomly drawn masks.
///
/// Masks are drawn uniformly with the all-ones and all-zeros masks always
/// present. The support is grown greedily by orthogonal matching pursuit over
/// every subset of order at most `max_order` (the constant term is always
/// kept), then coefficients are refit by ridge least squares on all queries.
pub fn fit_surrogate<V: ValueFunction + ?Sized>(
    value_fn: &V,
    cfg: &SurrogateConfig,
) -> Result<FourierSurrogate> {
    let p = value_fn.n_features();
    if p > MAX_SURROGATE_FEATURES {
        return Err(Error::invalid(format!(
            "{p} features exceeds the surrogate limit of {MAX_SURROGATE_FEATURES}"
        )));
    }
    if cfg.max_order == 0 {
        return Err(Error::invalid("max_order must be at least 1"));
    }
    if cfg.max_support == 0 || cfg.budget < 2 * cfg.max_support {
        return Err(Error::invalid(format!(
            "budget {} is too small for max_support {} (need at least twice as many masks)",
            cfg.budget, cfg.max_support
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let full = full_bits(p);
    let mut seen = HashSet::with_capacity(cfg.budget);
    let mut masks: Vec<u64> = Vec::with_capacity(cfg.budget);
    for i in 0..cfg.budget {
        let bits = match i {
            0 => full,
            1 => 0,
            _ => rng.random::<u64>() & full,
        };
        if seen.insert(bits) {
            masks.push(bits);
        }
    }
    let query: Vec<Mask> = masks
        .iter()
        .map(|&b| Mask::new(b, p))
        .collect::<Result<_>>()?;
    let values = value_fn.evaluate(&query)?;
    if values.len() != masks.len() {
        return Err(Error::Numerical(format!(
            "value function returned {} values for {} masks",
            values.len(),
            masks.len()
        )));
    }
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite value at mask {:#b}", masks[bad])));
    }

    let basis = FeatureSet::enumerate_up_to(p, cfg.max_order);

    // Hold out a random slice of masks (never the two anchors) to score the support.
    let mut order: Vec<usize> = (2.min(masks.len())..masks.len()).collect();
    order.shuffle(&mut rng);
    let n_hold = if masks.len() >= 10 {
        ((masks.len() as f64) * cfg.holdout_fraction).floor() as usize
    } else {
        0
    };
    let hold: HashSet<usize> = order[..n_hold.min(order.len())].iter().copied().collect();
    let (mut tr_m, mut tr_y, mut ho_m, mut ho_y) = (vec![], vec![], vec![], vec![]);
    for (i, (&m, &y)) in masks.iter().zip(&values).enumerate() {
        if hold.contains(&i) {
            ho_m.push(m);
            ho_y.push(y);
        } else {
            tr_m.push(m);
            tr_y.push(y);
        }
    }

    let support = matching_pursuit(&tr_m, &tr_y, &basis, cfg.max_support, cfg.tolerance)?;

    let holdout_r2 = if ho_m.is_empty() {
        None
    } else {
        let coef = ridge_fit(&tr_m, &tr_y, &support, cfg.ridge)?;
        r_squared(&ho_m, &ho_y, &support, &coef)
    };

    let coef = ridge_fit(&masks, &values, &support, cfg.ridge)?;
    let mut terms: Vec<(FeatureSet, f64)> = support.into_iter().zip(coef).collect();
    terms.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then(a.0.cmp(&b.0)));
    let mut s = FourierSurrogate::new(p, cfg.max_order, terms)?;
    s.diagnostics = FitDiagnostics {
        holdout_r2,
        queries: masks.len(),
        budget: cfg.budget,
        basis_size: basis.len(),
    };
    Ok(s)
}

fn matching_pursuit(
    masks: &[u64],
    y: &[f64],
    basis: &[FeatureSet],
    max_support: usize,
    tolerance: f64,
) -> Result<Vec<FeatureSet>> {
    let mut support = vec![FeatureSet::EMPTY];
    let mut in_support = vec![false; basis.len()];
    in_support[0] = true;
    let coef = ridge_fit(masks, y, &support, 0.0)?;
    let mut resid = residuals(masks, y, &support, &coef);
    let mut norm = l2(&resid);

    // Parity columns are tabulated once when they fit in memory.
    let n = masks.len();
    let table: Option<Vec<f64>> = (basis.len().saturating_mul(n) <= 1 << 24)
        .then(|| basis.iter().flat_map(|s| masks.iter().map(move |&m| chi(s.bits(), m))).collect());

    while support.len() < max_support.min(masks.len()) && norm >= tolerance {
        let mut best: Option<(usize, f64)> = None;
        for (j, s) in basis.iter().enumerate() {
            if in_support[j] {
                continue;
            }
            let corr: f64 = match &table {
                Some(t) => t[j * n..(j + 1) * n].iter().zip(&resid).map(|(c, r)| c * r).sum::<f64>(),
                None => masks.iter().zip(&resid).map(|(&m, &r)| r * chi(s.bits(), m)).sum::<f64>(),
            }
            .abs();
            if best.is_none_or(|(_, c)| corr > c) {
                best = Some((j, corr));
            }
        }
        let Some((j, _)) = best else { break };
        let mut candidate = support.clone();
        candidate.push(basis[j]);
        let coef = ridge_fit(masks, y, &candidate, 0.0)?;
        let r = residuals(masks, y, &candidate, &coef);
        let new_norm = l2(&r);
        if norm - new_norm < tolerance {
            break;
        }
        support = candidate;
        in_support[j] = true;
        resid = r;
        norm = new_norm;
    }
    Ok(support)
}

/// Least squares on the parity columns of `support`, with `ridge` applied to every
/// term except the constant.
fn ridge_fit(masks: &[u64], y: &[f64], support: &[FeatureSet], ridge: f64) -> Result<Vec<f64>> {
    let k = support.len();
    let mut gram = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DVector::<f64>::zeros(k);
    let mut row = vec![0.0; k];
    for (&m, &v) in masks.iter().zip(y) {
        for (a, s) in support.iter().enumerate() {
            row[a] = chi(s.bits(), m);
        }
        for a in 0..k {
            rhs[a] += row[a] * v;
            for b in a..k {
                gram[(a, b)] += row[a] * row[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
        if !support[a].is_empty() {
            gram[(a, a)] += ridge;
        }
    }
    solve_symmetric(gram, &rhs)
        .map(|x| x.iter().copied().collect())
        .ok_or_else(|| Error::Numerical("singular parity design".into()))
}

fn residuals(masks: &[u64], y: &[f64], support: &[FeatureSet], coef: &[f64]) -> Vec<f64> {
    masks
        .iter()
        .zip(y)
        .map(|(&m, &v)| v - predict_bits(m, support, coef))
        .collect()
}

fn predict_bits(m: u64, support: &[FeatureSet], coef: &[f64]) -> f64 {
    support.iter().zip(coef).map(|(s, c)| c * chi(s.bits(), m)).sum()
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn r_squared(masks: &[u64], y: &[f64], support: &[FeatureSet], coef: &[f64]) -> Option<f64> {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = residuals(masks, y, support, coef).iter().map(|r| r * r).sum();
    if ss_tot <= 1e-300 {
        return (ss_res <= 1e-18).then_some(1.0);
    }
    Some(1.0 - ss_res / ss_tot)
}
