use crate::error::{Error, Result};

/// Largest feature count accepted by the exhaustive transform.
pub const MAX_WHT_FEATURES: usize = 14;

fn log2_len(len: usize) -> Result<usize> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::invalid(format!("table length {len} is not a power of two")));
    }
    let p = len.trailing_zeros() as usize;
    if p > MAX_WHT_FEATURES {
        return Err(Error::invalid(format!(
            "{p} features exceeds the exhaustive transform limit of {MAX_WHT_FEATURES}"
        )));
    }
    Ok(p)
}

fn butterfly(a: &mut [f64]) {
    let mut h = 1;
    while h < a.len() {
        for block in a.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*x, *y);
                *x = u + v;
                *y = u - v;
            }
        }
        h *= 2;
    }
}

/// Full Fourier coefficient table `F(S) = 2^-p * sum_m f(m) chi_S(m)`.
///
/// `values[m]` is the function at the mask whose bits are `m`; the output is
/// indexed the same way by subset bits.
pub fn brute_force_wht(values: &[f64]) -> Result<Vec<f64>> {
    let p = log2_len(values.len())?;
    let mut a = values.to_vec();
    butterfly(&mut a);
    let scale = 1.0 / (1u64 << p) as f64;
    a.iter_mut().for_each(|v| *v *= scale);
    Ok(a)
}

/// Reconstructs the value table from a full coefficient table.
pub fn inverse_wht(coefficients: &[f64]) -> Result<Vec<f64>> {
    log2_len(coefficients.len())?;
    let mut a = coefficients.to_vec();
    butterfly(&mut a);
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::chi;
    use rand::{Rng, SeedableRng};

    #[test]
    fn single_parity() {
        let vals: Vec<f64> = (0..4u64).map(|m| chi(0b11, m)).collect();
        assert_eq!(brute_force_wht(&vals).unwrap(), vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn matches_definition() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let p = 5;
        let vals: Vec<f64> = (0..1 << p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = brute_force_wht(&vals).unwrap();
        for s in 0..1u64 << p {
            let direct: f64 = (0..1u64 << p).map(|m| vals[m as usize] * chi(s, m)).sum::<f64>() / 32.0;
            assert!((direct - fast[s as usize]).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for p in [0usize, 1, 4, 8, 12] {
            let vals: Vec<f64> = (0..1 << p).map(|_| rng.random_range(-3.0..3.0)).collect();
            let f = brute_force_wht(&vals).unwrap();
            let back = inverse_wht(&f).unwrap();
            for (a, b) in vals.iter().zip(&back) {
                assert!((a - b).abs() < 1e-12);
            }
            let mean_sq = vals.iter().map(|v| v * v).sum::<f64>() / vals.len() as f64;
            let energy: f64 = f.iter().map(|c| c * c).sum();
            assert!((mean_sq - energy).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_large_or_ragged_tables() {
        assert!(brute_force_wht(&vec![0.0; 1 << 15]).is_err());
        assert!(brute_force_wht(&[1.0, 2.0, 3.0]).is_err());
    }
}
