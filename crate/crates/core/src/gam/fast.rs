use serde::{Deserialize, Serialize};

use super::{sigmoid, softmax_into, GamModel};
use crate::data::{Dataset, FeatureBins, Task};
use crate::error::{Error, Result};
use crate::fourier::FeatureSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub pair: FeatureSet,
    /// Residual sum-of-squares reduction over the better single feature.
    pub score: f64,
}

/// Residual vectors of the additive model: `y - prediction`, or the negative
/// log-loss gradient per class for classifiers.
fn residuals(d: &Dataset, m: &GamModel) -> Vec<Vec<f64>> {
    let k = m.n_outputs();
    let mut probs = vec![0.0; k];
    d.features
        .rows()
        .enumerate()
        .map(|(i, r)| {
            let s = m.raw_scores(r);
            match d.task {
                Task::Regression => vec![d.target[i] - s[0]],
                Task::Binary => vec![d.target[i] - sigmoid(s[0])],
                Task::Multiclass => {
                    softmax_into(&s, &mut probs);
                    let y = d.class_of(i);
                    (0..k).map(|c| (c == y) as u8 as f64 - probs[c]).collect()
                }
            }
        })
        .collect()
}

/// Sum over cells of (sum of residuals)^2 / count; RSS = total - this.
fn explained(cells: &[usize], n_cells: usize, res: &[Vec<f64>]) -> f64 {
    let k = res.first().map_or(1, Vec::len);
    let mut sums = vec![0.0; n_cells * k];
    let mut counts = vec![0usize; n_cells];
    for (i, &c) in cells.iter().enumerate() {
        counts[c] += 1;
        for o in 0..k {
            sums[c * k + o] += res[i][o];
        }
    }
    (0..n_cells)
        .filter(|&c| counts[c] > 0)
        .map(|c| (0..k).map(|o| sums[c * k + o].powi(2)).sum::<f64>() / counts[c] as f64)
        .sum()
}

/// Ranks all feature pairs by how much a joint binned fit of the additive
/// model's residuals beats the best single-feature binned fit.
pub fn fast_select_pairs(train: &Dataset, additive: &GamModel, n_pairs: usize, bins_per_dim: usize) -> Result<Vec<PairScore>> {
    if additive.n_features != train.n_features() {
        return Err(Error::invalid("additive model and dataset disagree on feature count"));
    }
    if bins_per_dim < 2 {
        return Err(Error::invalid("bins_per_dim must be at least 2"));
    }
    let p = train.n_features();
    let res = residuals(train, additive);
    let total: f64 = res.iter().flatten().map(|r| r * r).sum();
    let bins: Vec<FeatureBins> = (0..p)
        .map(|j| FeatureBins::from_values(train.features.column(j), bins_per_dim))
        .collect();
    let binned: Vec<Vec<usize>> = (0..p)
        .map(|j| train.features.column(j).map(|v| bins[j].bin(v)).collect())
        .collect();
    let single_rss: Vec<f64> = (0..p)
        .map(|j| total - explained(&binned[j], bins[j].n_bins(), &res))
        .collect();

    let mut out = Vec::new();
    for a in 0..p {
        for b in a + 1..p {
            let nb = bins[b].n_bins();
            let cells: Vec<usize> = binned[a].iter().zip(&binned[b]).map(|(x, y)| x * nb + y).collect();
            let rss = total - explained(&cells, bins[a].n_bins() * nb, &res);
            let score = (single_rss[a].min(single_rss[b]) - rss).max(0.0);
            out.push(PairScore {
                pair: FeatureSet::of(&[a, b]),
                score,
            });
        }
    }
    // Stable sort keeps lexicographic order among ties.
    out.sort_by(|x, y| y.score.total_cmp(&x.score));
    out.truncate(n_pairs);
    Ok(out)
}
