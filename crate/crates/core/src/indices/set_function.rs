use crate::error::{Error, Result};
use crate::fourier::{full_bits, FeatureSet, FourierSurrogate};

/// Largest active set a [`SetFunction`] may tabulate.
pub const MAX_TABULATED_FEATURES: usize = 16;

/// A set function over an active feature set `A`, tabulated on all `2^|A|`
/// subsets. Local bit `i` of a table index stands for global feature `active[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SetFunction {
    active: Vec<usize>,
    values: Vec<f64>,
}

impl SetFunction {
    pub fn new(active: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let n = active.len();
        if n > MAX_TABULATED_FEATURES {
            return Err(Error::invalid(format!(
                "active set of {n} features exceeds the tabulation limit of {MAX_TABULATED_FEATURES}"
            )));
        }
        if values.len() != 1 << n {
            return Err(Error::invalid(format!(
                "{} values given for {} subsets",
                values.len(),
                1usize << n
            )));
        }
        if !active.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("active features must be strictly increasing"));
        }
        if active.iter().any(|&j| j >= crate::fourier::MAX_FEATURES) {
            return Err(Error::invalid("active feature index out of range"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("set function values must be finite"));
        }
        Ok(Self { active, values })
    }

    /// Tabulates `f` over every subset of `active` (given as global feature sets).
    pub fn from_fn<F: Fn(FeatureSet) -> f64>(active: Vec<usize>, f: F) -> Result<Self> {
        let n = active.len();
        if n > MAX_TABULATED_FEATURES {
            return Err(Error::invalid(format!(
                "active set of {n} features exceeds the tabulation limit of {MAX_TABULATED_FEATURES}"
            )));
        }
        let values = (0..1u64 << n)
            .map(|local| {
                let global = (0..n)
                    .filter(|i| local >> i & 1 == 1)
                    .fold(0u64, |acc, i| acc | 1 << active[i]);
                f(FeatureSet::from_bits(global))
            })
            .collect();
        Self::new(active, values)
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn n(&self) -> usize {
        self.active.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, local: u64) -> f64 {
        self.values[local as usize]
    }

    /// Value on a global subset of the active set.
    pub fn value_of(&self, s: FeatureSet) -> Result<f64> {
        Ok(self.value(self.to_local(s)?))
    }

    pub(crate) fn full(&self) -> u64 {
        full_bits(self.n())
    }

    pub fn to_local(&self, s: FeatureSet) -> Result<u64> {
        let mut local = 0u64;
        for j in s.iter() {
            let i = self
                .active
                .binary_search(&j)
                .map_err(|_| Error::invalid(format!("feature {j} is not in the active set")))?;
            local |= 1 << i;
        }
        Ok(local)
    }

    pub fn to_global(&self, local: u64) -> FeatureSet {
        FeatureSet::from_bits(
            FeatureSet::from_bits(local)
                .iter()
                .fold(0u64, |acc, i| acc | 1 << self.active[i]),
        )
    }

    /// Local-bit discrete derivative; `s` and `t` must be disjoint.
    pub(crate) fn derivative(&self, s: u64, t: u64) -> f64 {
        let sz = s.count_ones();
        FeatureSet::from_bits(s)
            .subsets()
            .map(|w| {
                let v = self.value(t | w.bits());
                if (sz - w.len() as u32) % 2 == 0 {
                    v
                } else {
                    -v
                }
            })
            .sum()
    }
}

/// Tabulates a surrogate on the subcube spanned by its support features, with
/// every other feature held at bit 1 (kept).
pub fn restrict_surrogate(s: &FourierSurrogate) -> Result<SetFunction> {
    let active = s.active_features();
    if active.len() > MAX_TABULATED_FEATURES {
        return Err(Error::invalid(format!(
            "surrogate active set of {} features exceeds the tabulation limit of {MAX_TABULATED_FEATURES}",
            active.len()
        )));
    }
    if s.terms().is_empty() {
        return SetFunction::new(Vec::new(), vec![0.0]);
    }
    let outside = full_bits(s.n_features()) & !active.bits();
    SetFunction::from_fn(active.indices(), |t| s.eval_bits(outside | t.bits()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::Mask;

    #[test]
    fn local_global_mapping() {
        let f = SetFunction::from_fn(vec![2, 5, 7], |t| t.bits() as f64).unwrap();
        assert_eq!(f.to_local(FeatureSet::of(&[5, 7])).unwrap(), 0b110);
        assert_eq!(f.to_global(0b101), FeatureSet::of(&[2, 7]));
        assert_eq!(f.value(0b011), ((1u64 << 2) | (1 << 5)) as f64);
        assert!(f.to_local(FeatureSet::of(&[3])).is_err());
    }

    #[test]
    fn restrict_examples() {
        let s = FourierSurrogate::new(10, 3, vec![(FeatureSet::EMPTY, 1.0), (FeatureSet::of(&[0]), 0.5)]).unwrap();
        let f = restrict_surrogate(&s).unwrap();
        assert_eq!(f.active(), &[0]);
        assert_eq!(f.values(), &[1.5, 0.5]);

        let empty = FourierSurrogate::new(4, 3, vec![]).unwrap();
        let f = restrict_surrogate(&empty).unwrap();
        assert_eq!(f.n(), 0);
        assert_eq!(f.values(), &[0.0]);
    }

    #[test]
    fn restriction_matches_direct_evaluation() {
        let s = FourierSurrogate::new(
            8,
            3,
            vec![
                (FeatureSet::EMPTY, 0.3),
                (FeatureSet::of(&[1, 6]), -1.0),
                (FeatureSet::of(&[2, 3, 6]), 0.25),
            ],
        )
        .unwrap();
        let f = restrict_surrogate(&s).unwrap();
        assert_eq!(f.active(), &[1, 2, 3, 6]);
        for local in 0..16u64 {
            let t = f.to_global(local);
            let bits = t.bits() | (0xff & !0b0100_1110);
            let direct = s.eval(Mask::new(bits, 8).unwrap()).unwrap();
            assert_eq!(f.value(local), direct);
        }
    }

    #[test]
    fn rejects_oversized_active_sets() {
        let terms = (0..17).map(|j| (FeatureSet::of(&[j]), 1.0)).collect();
        let s = FourierSurrogate::new(20, 3, terms).unwrap();
        let e = restrict_surrogate(&s).unwrap_err();
        assert!(e.to_string().contains("17"), "{e}");
    }
}
