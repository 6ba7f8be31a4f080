//! Game-theoretic interaction indices over feature subsets.
//!
//! Indices are computed either directly from a [`FourierSurrogate`]'s
//! coefficients (FBII, Möbius, Fourier) or from a tabulated [`SetFunction`]
//! (BII, SII, STII, FSII), usually obtained with [`restrict_surrogate`].
//! Every routine here follows the defining formula of its index; the test
//! suites check them against independent algebraic identities.

mod faith;
mod set_function;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{FeatureSet, FourierSurrogate};

pub use faith::fsii;
pub use set_function::{restrict_surrogate, SetFunction, MAX_TABULATED_FEATURES};

/// Largest active set accepted by [`fsii`].
pub const MAX_FSII_FEATURES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IndexKind {
    #[serde(rename = "FBII")]
    Fbii,
    #[serde(rename = "FSII")]
    Fsii,
    #[serde(rename = "STII")]
    Stii,
    #[serde(rename = "BII")]
    Bii,
    #[serde(rename = "SII")]
    Sii,
    Mobius,
    Fourier,
}

impl IndexKind {
    pub const ALL: [IndexKind; 7] = [
        IndexKind::Fbii,
        IndexKind::Fsii,
        IndexKind::Stii,
        IndexKind::Bii,
        IndexKind::Sii,
        IndexKind::Mobius,
        IndexKind::Fourier,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IndexKind::Fbii => "FBII",
            IndexKind::Fsii => "FSII",
            IndexKind::Stii => "STII",
            IndexKind::Bii => "BII",
            IndexKind::Sii => "SII",
            IndexKind::Mobius => "Mobius",
            IndexKind::Fourier => "Fourier",
        }
    }

    /// Whether the index needs a tabulated set function rather than raw coefficients.
    pub fn needs_table(self) -> bool {
        matches!(self, IndexKind::Fsii | IndexKind::Stii | IndexKind::Bii | IndexKind::Sii)
    }
}

impl fmt::Display for IndexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IndexKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        IndexKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown interaction index `{s}`")))
    }
}

/// Scores assigned by one index to feature subsets of one explained sample.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexScores {
    pub kind: IndexKind,
    pub order: usize,
    pub scores: BTreeMap<FeatureSet, f64>,
}

#[derive(Serialize, Deserialize)]
struct ScoresRepr {
    kind: IndexKind,
    k: usize,
    entries: Vec<ScoreEntry>,
}

#[derive(Serialize, Deserialize)]
struct ScoreEntry {
    subset: FeatureSet,
    score: f64,
}

impl Serialize for IndexScores {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ScoresRepr {
            kind: self.kind,
            k: self.order,
            entries: self
                .ranked()
                .into_iter()
                .map(|(subset, score)| ScoreEntry { subset, score })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for IndexScores {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = ScoresRepr::deserialize(d)?;
        Ok(IndexScores {
            kind: r.kind,
            order: r.k,
            scores: r.entries.into_iter().map(|e| (e.subset, e.score)).collect(),
        })
    }
}

impl IndexScores {
    pub fn new(kind: IndexKind, order: usize) -> Self {
        Self {
            kind,
            order,
            scores: BTreeMap::new(),
        }
    }

    pub fn get(&self, s: FeatureSet) -> Option<f64> {
        self.scores.get(&s).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Entries by descending `|score|`, ties broken lexicographically.
    pub fn ranked(&self) -> Vec<(FeatureSet, f64)> {
        let mut v: Vec<(FeatureSet, f64)> = self.scores.iter().map(|(&s, &v)| (s, v)).collect();
        v.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
        v
    }

    /// Keeps only subsets with at least `min_size` features.
    pub fn retain_min_size(&mut self, min_size: usize) {
        self.scores.retain(|s, _| s.len() >= min_size);
    }
}

/// `Δ_S f(T) = Σ_{W⊆S} (−1)^{|S|−|W|} f(T ∪ W)` for disjoint `S`, `T` inside the active set.
pub fn discrete_derivative(f: &SetFunction, s: FeatureSet, t: FeatureSet) -> Result<f64> {
    if !s.is_disjoint(t) {
        return Err(Error::invalid(format!("subsets {s} and {t} overlap")));
    }
    let s = f.to_local(s)?;
    let t = f.to_local(t)?;
    Ok(f.derivative(s, t))
}

/// Möbius transform (Harsanyi dividends) of a tabulated set function, on every subset.
pub fn mobius(f: &SetFunction) -> Result<IndexScores> {
    let table = mobius_table(f.values());
    let mut out = IndexScores::new(IndexKind::Mobius, f.n());
    for (local, &a) in table.iter().enumerate() {
        out.scores.insert(f.to_global(local as u64), a);
    }
    Ok(out)
}

/// In-place subset-sum inversion: `a(S) = Σ_{T⊆S} (−1)^{|S|−|T|} f(T)`.
pub fn mobius_table(values: &[f64]) -> Vec<f64> {
    let mut a = values.to_vec();
    let n = a.len().trailing_zeros();
    for i in 0..n {
        let bit = 1usize << i;
        for m in 0..a.len() {
            if m & bit != 0 {
                a[m] -= a[m ^ bit];
            }
        }
    }
    a
}

/// Inverse of [`mobius_table`]: `f(S) = Σ_{T⊆S} a(T)`.
pub fn zeta_table(dividends: &[f64]) -> Vec<f64> {
    let mut f = dividends.to_vec();
    let n = f.len().trailing_zeros();
    for i in 0..n {
        let bit = 1usize << i;
        for m in 0..f.len() {
            if m & bit != 0 {
                f[m] += f[m ^ bit];
            }
        }
    }
    f
}

/// Multilinear coefficients `(−2)^{|W|} Σ_{S⊇W, |S|≤order} F(S)` for every `W`
/// (|W| ≤ order) contained in some support subset.
fn multilinear_from_fourier(s: &FourierSurrogate, order: usize, kind: IndexKind) -> IndexScores {
    let mut acc: BTreeMap<FeatureSet, f64> = BTreeMap::new();
    for &(set, c) in s.terms() {
        for w in set.subsets() {
            if w.len() > order {
                continue;
            }
            let slot = acc.entry(w).or_insert(0.0);
            if set.len() <= order {
                *slot += c;
            }
        }
    }
    let mut out = IndexScores::new(kind, order);
    for (w, sum) in acc {
        out.scores.insert(w, (-2.0f64).powi(w.len() as i32) * sum);
    }
    out
}

/// Faith-Banzhaf interaction index of order `k`, read off the Fourier coefficients.
///
/// These are the coefficients of the best uniform-measure least-squares
/// multilinear approximation of degree at most `k` in the mask bits.
pub fn fbii_from_fourier(s: &FourierSurrogate, k: usize) -> Result<IndexScores> {
    if k > s.max_order() {
        return Err(Error::invalid(format!(
            "order {k} exceeds the surrogate's maximum order {}",
            s.max_order()
        )));
    }
    Ok(multilinear_from_fourier(s, k, IndexKind::Fbii))
}

/// Möbius coefficients of the surrogate, with features outside the support kept.
pub fn mobius_from_fourier(s: &FourierSurrogate) -> IndexScores {
    let order = s.terms().iter().map(|t| t.0.len()).max().unwrap_or(0);
    multilinear_from_fourier(s, order, IndexKind::Mobius)
}

/// `|F(S)|` for every support subset.
pub fn fourier_index(s: &FourierSurrogate) -> IndexScores {
    let mut out = IndexScores::new(IndexKind::Fourier, s.max_order());
    for &(set, c) in s.terms() {
        out.scores.insert(set, c.abs());
    }
    out
}

fn factorials(n: usize) -> Vec<f64> {
    let mut f = vec![1.0; n + 2];
    for i in 1..f.len() {
        f[i] = f[i - 1] * i as f64;
    }
    f
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Banzhaf interaction index: the uniform average of `Δ_S f(T)` over `T ⊆ A∖S`.
pub fn bii(f: &SetFunction, s: FeatureSet) -> Result<f64> {
    let s = f.to_local(s)?;
    Ok(bii_local(f, s))
}

fn bii_local(f: &SetFunction, s: u64) -> f64 {
    let rest = f.full() & !s;
    let n_rest = rest.count_ones();
    let total: f64 = FeatureSet::from_bits(rest)
        .subsets()
        .map(|t| f.derivative(s, t.bits()))
        .sum();
    total / (1u64 << n_rest) as f64
}

/// Shapley interaction index of `S`.
pub fn sii(f: &SetFunction, s: FeatureSet) -> Result<f64> {
    let s = f.to_local(s)?;
    Ok(sii_local(f, s, &factorials(f.n())))
}

fn sii_local(f: &SetFunction, s: u64, fact: &[f64]) -> f64 {
    let n = f.n();
    let sz = s.count_ones() as usize;
    let rest = f.full() & !s;
    FeatureSet::from_bits(rest)
        .subsets()
        .map(|t| {
            let tz = t.len();
            let w = fact[n - tz - sz] * fact[tz] / fact[n - sz + 1];
            w * f.derivative(s, t.bits())
        })
        .sum()
}

fn scores_by<F>(f: &SetFunction, k: usize, kind: IndexKind, mut score: F) -> IndexScores
where
    F: FnMut(u64) -> f64,
{
    let mut out = IndexScores::new(kind, k);
    for local in FeatureSet::enumerate_up_to(f.n(), k) {
        if local.is_empty() {
            continue;
        }
        out.scores.insert(f.to_global(local.bits()), score(local.bits()));
    }
    out
}

/// BII for every non-empty subset of at most `k` active features.
pub fn bii_scores(f: &SetFunction, k: usize) -> IndexScores {
    scores_by(f, k, IndexKind::Bii, |s| bii_local(f, s))
}

/// SII for every non-empty subset of at most `k` active features.
pub fn sii_scores(f: &SetFunction, k: usize) -> IndexScores {
    let fact = factorials(f.n());
    scores_by(f, k, IndexKind::Sii, |s| sii_local(f, s, &fact))
}

/// Shapley values of the active features, in active-set order.
pub fn shapley_values(f: &SetFunction) -> Vec<f64> {
    let fact = factorials(f.n());
    (0..f.n()).map(|i| sii_local(f, 1 << i, &fact)).collect()
}

/// Shapley-Taylor interaction index of order `k` on every non-empty `|S| ≤ k`.
pub fn stii(f: &SetFunction, k: usize) -> Result<IndexScores> {
    let n = f.n();
    if k == 0 || k > n {
        return Err(Error::invalid(format!(
            "order {k} outside 1..={n} for the active set"
        )));
    }
    Ok(scores_by(f, k, IndexKind::Stii, |s| {
        let sz = s.count_ones() as usize;
        if sz < k {
            return f.derivative(s, 0);
        }
        let rest = f.full() & !s;
        let sum: f64 = FeatureSet::from_bits(rest)
            .subsets()
            .map(|t| f.derivative(s, t.bits()) / binomial(n - 1, t.len()))
            .sum();
        k as f64 / n as f64 * sum
    }))
}

/// Computes `kind` of order `k` on a surrogate, tabulating it when required.
pub fn index_from_surrogate(kind: IndexKind, s: &FourierSurrogate, k: usize) -> Result<IndexScores> {
    match kind {
        IndexKind::Fbii => fbii_from_fourier(s, k.min(s.max_order())),
        IndexKind::Mobius => Ok(mobius_from_fourier(s)),
        IndexKind::Fourier => Ok(fourier_index(s)),
        IndexKind::Bii | IndexKind::Sii | IndexKind::Stii | IndexKind::Fsii => {
            let f = restrict_surrogate(s)?;
            let k = k.min(f.n());
            if k == 0 {
                return Ok(IndexScores::new(kind, 0));
            }
            match kind {
                IndexKind::Bii => Ok(bii_scores(&f, k)),
                IndexKind::Sii => Ok(sii_scores(&f, k)),
                IndexKind::Stii => stii(&f, k),
                _ => fsii(&f, k),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn and_game() -> SetFunction {
        SetFunction::new(vec![0, 1], vec![0.0, 0.0, 0.0, 1.0]).unwrap()
    }

    fn cardinality(n: usize) -> SetFunction {
        SetFunction::from_fn((0..n).collect(), |t| t.len() as f64).unwrap()
    }

    #[test]
    fn derivative_examples() {
        let f = and_game();
        assert_eq!(discrete_derivative(&f, FeatureSet::EMPTY, FeatureSet::of(&[1])).unwrap(), 0.0);
        assert_eq!(discrete_derivative(&f, FeatureSet::of(&[0, 1]), FeatureSet::EMPTY).unwrap(), 1.0);
        let g = cardinality(4);
        assert_eq!(discrete_derivative(&g, FeatureSet::of(&[0, 2]), FeatureSet::of(&[1])).unwrap(), 0.0);
        assert_eq!(discrete_derivative(&g, FeatureSet::EMPTY, FeatureSet::of(&[1, 3])).unwrap(), 2.0);
        assert!(discrete_derivative(&g, FeatureSet::of(&[0]), FeatureSet::of(&[0])).is_err());
        assert!(discrete_derivative(&g, FeatureSet::of(&[7]), FeatureSet::EMPTY).is_err());
    }

    #[test]
    fn mobius_examples() {
        let m = mobius(&cardinality(2)).unwrap();
        assert_eq!(m.get(FeatureSet::EMPTY), Some(0.0));
        assert_eq!(m.get(FeatureSet::of(&[0])), Some(1.0));
        assert_eq!(m.get(FeatureSet::of(&[1])), Some(1.0));
        assert_eq!(m.get(FeatureSet::of(&[0, 1])), Some(0.0));
        let m = mobius(&and_game()).unwrap();
        assert_eq!(m.get(FeatureSet::of(&[0, 1])), Some(1.0));
        assert_eq!(m.get(FeatureSet::of(&[0])), Some(0.0));
    }

    #[test]
    fn banzhaf_and_shapley_on_and_game() {
        let f = and_game();
        assert_eq!(bii(&f, FeatureSet::of(&[0, 1])).unwrap(), 1.0);
        assert_eq!(bii(&f, FeatureSet::of(&[0])).unwrap(), 0.5);
        assert_eq!(sii(&f, FeatureSet::of(&[0])).unwrap(), 0.5);
        assert_eq!(sii(&f, FeatureSet::of(&[0, 1])).unwrap(), 1.0);
        assert!(bii(&f, FeatureSet::of(&[3])).is_err());
    }

    #[test]
    fn stii_examples() {
        let f = and_game();
        let s = stii(&f, 2).unwrap();
        assert_eq!(s.get(FeatureSet::of(&[0])), Some(0.0));
        assert_eq!(s.get(FeatureSet::of(&[1])), Some(0.0));
        assert_eq!(s.get(FeatureSet::of(&[0, 1])), Some(1.0));
        assert!(stii(&f, 3).is_err());
        assert!(stii(&f, 0).is_err());
    }

    #[test]
    fn fbii_of_single_parity() {
        let s = FourierSurrogate::new(2, 2, vec![(FeatureSet::of(&[0, 1]), 1.0)]).unwrap();
        let b = fbii_from_fourier(&s, 2).unwrap();
        assert_eq!(b.get(FeatureSet::EMPTY), Some(1.0));
        assert_eq!(b.get(FeatureSet::of(&[0])), Some(-2.0));
        assert_eq!(b.get(FeatureSet::of(&[1])), Some(-2.0));
        assert_eq!(b.get(FeatureSet::of(&[0, 1])), Some(4.0));
        let c = FourierSurrogate::new(5, 3, vec![(FeatureSet::EMPTY, 2.0)]).unwrap();
        let b = fbii_from_fourier(&c, 3).unwrap();
        assert_eq!(b.scores.len(), 1);
        assert_eq!(b.get(FeatureSet::EMPTY), Some(2.0));
        assert!(fbii_from_fourier(&c, 4).is_err());
    }

    #[test]
    fn fourier_index_uses_magnitudes() {
        let s = FourierSurrogate::new(3, 3, vec![(FeatureSet::of(&[0, 2]), -3.0)]).unwrap();
        assert_eq!(fourier_index(&s).get(FeatureSet::of(&[0, 2])), Some(3.0));
    }

    #[test]
    fn ranked_json_layout() {
        let mut s = IndexScores::new(IndexKind::Bii, 2);
        s.scores.insert(FeatureSet::of(&[0, 1]), 0.1);
        s.scores.insert(FeatureSet::of(&[2, 3]), -0.9);
        let v = serde_json::to_value(&s).unwrap();
        assert_eq!(v["kind"], "BII");
        assert_eq!(v["k"], 2);
        assert_eq!(v["entries"][0]["subset"], serde_json::json!([2, 3]));
        let back: IndexScores = serde_json::from_value(v).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in IndexKind::ALL {
            assert_eq!(k.name().parse::<IndexKind>().unwrap(), k);
        }
        assert_eq!("fbii".parse::<IndexKind>().unwrap(), IndexKind::Fbii);
        assert!("shap".parse::<IndexKind>().is_err());
    }
}
