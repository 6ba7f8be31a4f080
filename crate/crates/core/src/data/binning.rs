use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Sorted cut points for one feature. A value `v` falls into the bin whose
/// index equals the number of cuts strictly below `v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBins {
    pub cuts: Vec<f64>,
}

impl FeatureBins {
    pub fn n_bins(&self) -> usize {
        self.cuts.len() + 1
    }

    pub fn bin(&self, v: f64) -> usize {
        self.cuts.partition_point(|&c| c < v)
    }

    /// Equal-mass cut points over `values`, one bin per distinct value when
    /// there are at most `max_bins` of them.
    pub fn from_values(values: impl Iterator<Item = f64>, max_bins: usize) -> Self {
        let mut sorted: Vec<f64> = values.collect();
        sorted.sort_by(f64::total_cmp);
        let mut distinct = sorted.clone();
        distinct.dedup();
        let cuts = if distinct.len() <= max_bins {
            distinct.windows(2).map(|w| midpoint(w[0], w[1])).collect()
        } else {
            let n = sorted.len();
            let mut cuts: Vec<f64> = Vec::with_capacity(max_bins - 1);
            for i in 1..max_bins {
                let pos = ((i * n) as f64 / max_bins as f64).round() as usize;
                if pos == 0 || pos >= n || sorted[pos - 1] == sorted[pos] {
                    continue;
                }
                let c = midpoint(sorted[pos - 1], sorted[pos]);
                if cuts.last().is_none_or(|&last| c > last) {
                    cuts.push(c);
                }
            }
            cuts
        };
        Self { cuts }
    }
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    // Guard against rounding onto the upper value for adjacent floats.
    if m >= b {
        a
    } else {
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningSpec {
    pub features: Vec<FeatureBins>,
    pub max_bins: usize,
}

impl BinningSpec {
    pub fn bin(&self, feature: usize, v: f64) -> usize {
        self.features[feature].bin(v)
    }
}

pub fn build_bins(d: &Dataset, max_bins: usize) -> Result<BinningSpec> {
    if max_bins < 2 {
        return Err(Error::invalid(format!("max_bins must be at least 2, got {max_bins}")));
    }
    let features = (0..d.n_features())
        .map(|j| FeatureBins::from_values(d.features.column(j), max_bins))
        .collect();
    Ok(BinningSpec { features, max_bins })
}
