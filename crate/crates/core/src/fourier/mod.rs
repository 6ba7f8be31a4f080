//! Boolean Fourier analysis over feature masks.
//!
//! A [`Mask`] is a bit vector over the `p` features of a sample (bit `j` set
//! means feature `j` is kept). Functions of masks are expanded in the parity
//! basis `chi_S(m) = (-1)^{|S ∩ m|}`; [`FourierSurrogate`] holds a sparse
//! expansion and [`fit_surrogate`] recovers one from value-function queries.

mod surrogate;
mod wht;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use surrogate::{
    eval_surrogate, fit_surrogate, FitDiagnostics, FnValue, FourierSurrogate, SurrogateConfig, ValueFunction,
    MAX_SURROGATE_FEATURES,
};
pub use wht::{brute_force_wht, inverse_wht, MAX_WHT_FEATURES};

/// Largest feature index a [`FeatureSet`] can hold, plus one.
pub const MAX_FEATURES: usize = 64;

/// A set of feature indices stored as a bitmask.
///
/// Ordering is lexicographic over the sorted index lists, so `{0,1} < {0,2} < {1}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct FeatureSet(u64);

impl FeatureSet {
    pub const EMPTY: FeatureSet = FeatureSet(0);

    pub fn from_bits(bits: u64) -> Self {
        FeatureSet(bits)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Result<Self> {
        let mut bits = 0u64;
        for j in indices {
            if j >= MAX_FEATURES {
                return Err(Error::invalid(format!(
                    "feature index {j} exceeds the supported maximum {}",
                    MAX_FEATURES - 1
                )));
            }
            bits |= 1 << j;
        }
        Ok(FeatureSet(bits))
    }

    /// Convenience constructor for literal index lists; panics on indices >= 64.
    pub fn of(indices: &[usize]) -> Self {
        Self::from_indices(indices.iter().copied()).expect("feature index below 64")
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, j: usize) -> bool {
        j < MAX_FEATURES && self.0 >> j & 1 == 1
    }

    pub fn is_subset_of(self, other: FeatureSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: FeatureSet) -> bool {
        self.0 & other.0 == 0
    }

    pub fn union(self, other: FeatureSet) -> FeatureSet {
        FeatureSet(self.0 | other.0)
    }

    pub fn intersection(self, other: FeatureSet) -> FeatureSet {
        FeatureSet(self.0 & other.0)
    }

    pub fn difference(self, other: FeatureSet) -> FeatureSet {
        FeatureSet(self.0 & !other.0)
    }

    /// Largest index plus one, or 0 for the empty set.
    pub fn span(self) -> usize {
        64 - self.0.leading_zeros() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let j = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(j)
            }
        })
    }

    pub fn indices(self) -> Vec<usize> {
        self.iter().collect()
    }

    /// All subsets of `{0..p}` with at most `max_size` elements, ordered by
    /// size and then lexicographically.
    pub fn enumerate_up_to(p: usize, max_size: usize) -> Vec<FeatureSet> {
        let mut out = vec![FeatureSet::EMPTY];
        let mut layer = vec![FeatureSet::EMPTY];
        for _ in 0..max_size.min(p) {
            let mut next = Vec::new();
            for s in &layer {
                for j in s.span()..p {
                    next.push(FeatureSet(s.0 | 1 << j));
                }
            }
            next.sort();
            out.extend_from_slice(&next);
            layer = next;
        }
        out
    }

    /// Iterates over every subset of `self` (including the empty set and itself).
    pub fn subsets(self) -> impl Iterator<Item = FeatureSet> {
        let full = self.0;
        let mut cur = 0u64;
        let mut done = false;
        std::iter::from_fn(move || {
            if done {
                return None;
            }
            let out = FeatureSet(cur);
            if cur == full {
                done = true;
            } else {
                cur = (cur.wrapping_sub(full)) & full;
            }
            Some(out)
        })
    }
}

impl Ord for FeatureSet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.iter().cmp(other.iter())
    }
}

impl PartialOrd for FeatureSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, j) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{j}")?;
        }
        f.write_str("}")
    }
}

impl Serialize for FeatureSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for FeatureSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<usize>::deserialize(d)?;
        FeatureSet::from_indices(v).map_err(serde::de::Error::custom)
    }
}

/// Bit vector over the features of one context (bit set = feature kept).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Mask {
    bits: u64,
    len: usize,
}

impl Mask {
    pub fn new(bits: u64, len: usize) -> Result<Self> {
        if len > MAX_FEATURES {
            return Err(Error::invalid(format!("mask length {len} exceeds {MAX_FEATURES}")));
        }
        if len < 64 && bits >> len != 0 {
            return Err(Error::invalid(format!("mask bits set beyond length {len}")));
        }
        Ok(Self { bits, len })
    }

    pub fn from_bools(bits: &[bool]) -> Result<Self> {
        let mut b = 0u64;
        for (j, &on) in bits.iter().enumerate() {
            if on && j < 64 {
                b |= 1 << j;
            }
        }
        Self::new(b, bits.len())
    }

    pub fn ones(len: usize) -> Self {
        Self { bits: full_bits(len), len }
    }

    pub fn zeros(len: usize) -> Self {
        Self { bits: 0, len }
    }

    pub fn bits(self) -> u64 {
        self.bits
    }

    pub fn len(self) -> usize {
        self.len
    }

    pub fn is_empty(self) -> bool {
        self.len == 0
    }

    pub fn get(self, j: usize) -> bool {
        self.bits >> j & 1 == 1
    }

    pub fn kept(self) -> FeatureSet {
        FeatureSet(self.bits)
    }
}

pub(crate) fn full_bits(len: usize) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

/// `(-1)^{|S ∩ m|}` without range checks.
#[inline]
pub(crate) fn chi(subset_bits: u64, mask_bits: u64) -> f64 {
    if (subset_bits & mask_bits).count_ones() & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// The parity basis function `chi_S(m)`.
pub fn parity(subset: FeatureSet, mask: Mask) -> Result<f64> {
    if subset.span() > mask.len() {
        return Err(Error::invalid(format!(
            "subset {subset} out of range for a mask of length {}",
            mask.len()
        )));
    }
    Ok(chi(subset.bits(), mask.bits()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parity_examples() {
        let m = Mask::from_bools(&[true, true, false]).unwrap();
        assert_eq!(parity(FeatureSet::EMPTY, m).unwrap(), 1.0);
        assert_eq!(parity(FeatureSet::of(&[0, 1]), m).unwrap(), 1.0);
        let m = Mask::from_bools(&[true, false]).unwrap();
        assert_eq!(parity(FeatureSet::of(&[0]), m).unwrap(), -1.0);
        assert!(parity(FeatureSet::of(&[2]), m).is_err());
    }

    #[test]
    fn orthogonality_of_parities() {
        let p = 6;
        let sets = FeatureSet::enumerate_up_to(p, p);
        assert_eq!(sets.len(), 64);
        for &s in &sets {
            for &t in &sets {
                let dot: f64 = (0..1u64 << p).map(|m| chi(s.bits(), m) * chi(t.bits(), m)).sum();
                assert_eq!(dot, if s == t { 64.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn enumeration_order_and_count() {
        let sets = FeatureSet::enumerate_up_to(10, 3);
        assert_eq!(sets.len(), 1 + 10 + 45 + 120);
        assert_eq!(sets[0], FeatureSet::EMPTY);
        assert_eq!(sets[1], FeatureSet::of(&[0]));
        assert_eq!(sets[11], FeatureSet::of(&[0, 1]));
        assert!(sets.windows(2).all(|w| w[0].len() < w[1].len() || w[0] < w[1]));
    }

    #[test]
    fn lexicographic_order() {
        assert!(FeatureSet::of(&[0, 1]) < FeatureSet::of(&[0, 2]));
        assert!(FeatureSet::of(&[0, 2]) < FeatureSet::of(&[1]));
        assert!(FeatureSet::EMPTY < FeatureSet::of(&[0]));
    }

    #[test]
    fn subsets_enumerates_power_set() {
        let s = FeatureSet::of(&[1, 4, 5]);
        let subs: Vec<_> = s.subsets().collect();
        assert_eq!(subs.len(), 8);
        assert!(subs.iter().all(|t| t.is_subset_of(s)));
        assert_eq!(FeatureSet::EMPTY.subsets().count(), 1);
    }

    #[test]
    fn feature_set_json() {
        let s = FeatureSet::of(&[3, 1]);
        assert_eq!(serde_json::to_string(&s).unwrap(), "[1,3]");
        let back: FeatureSet = serde_json::from_str("[1,3]").unwrap();
        assert_eq!(back, s);
    }
}
