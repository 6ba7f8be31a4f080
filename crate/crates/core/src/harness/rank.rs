use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::metrics::Metric;
use crate::error::{Error, Result};
use crate::fourier::FeatureSet;

/// One long-format measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub dataset: String,
    pub method: String,
    pub metric: Metric,
    pub n_int: usize,
    pub seed: u64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub dataset: String,
    pub method: String,
    pub seed: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub records: Vec<MetricRecord>,
    pub seeds: Vec<u64>,
    pub timings: Vec<Timing>,
}

impl MetricReport {
    pub fn datasets(&self) -> BTreeSet<String> {
        self.records.iter().map(|r| r.dataset.clone()).collect()
    }

    pub fn methods(&self) -> BTreeSet<String> {
        self.records.iter().map(|r| r.method.clone()).collect()
    }

    /// Records sorted by (dataset, method, metric, N_int, seed).
    pub fn sort(&mut self) {
        self.records.sort_by(|a, b| {
            (&a.dataset, &a.method, a.metric, a.n_int, a.seed).cmp(&(&b.dataset, &b.method, b.metric, b.n_int, b.seed))
        });
        self.timings
            .sort_by(|a, b| (&a.dataset, &a.method, a.seed).cmp(&(&b.dataset, &b.method, b.seed)));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub metric: Metric,
    pub n_int: usize,
    pub method: String,
    /// Mean over datasets of the per-dataset rank; 1 is best.
    pub average_rank: f64,
    pub n_datasets: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub methods: Vec<String>,
    pub rows: Vec<RankRow>,
}

impl RankTable {
    pub fn get(&self, metric: Metric, n_int: usize, method: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.metric == metric && r.n_int == n_int && r.method == method)
            .map(|r| r.average_rank)
    }
}

/// Ranks of `values` (1 = best) with tied values sharing the mean of their positions.
pub fn tied_ranks(values: &[f64], higher_is_better: bool) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let c = values[a].total_cmp(&values[b]);
        if higher_is_better {
            c.reverse()
        } else {
            c
        }
    });
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Average rank of every method per (metric, N_int). Seeds are averaged
/// within a dataset before ranking; every method must cover every cell.
pub fn rank_methods(report: &MetricReport) -> Result<RankTable> {
    let methods: Vec<String> = report.methods().into_iter().collect();
    // (dataset, metric, n_int) -> method -> (sum, count)
    let mut cells: BTreeMap<(String, Metric, usize), BTreeMap<String, (f64, usize)>> = BTreeMap::new();
    for r in &report.records {
        let e = cells
            .entry((r.dataset.clone(), r.metric, r.n_int))
            .or_default()
            .entry(r.method.clone())
            .or_insert((0.0, 0));
        e.0 += r.value;
        e.1 += 1;
    }
    let mut sums: BTreeMap<(Metric, usize, String), (f64, usize)> = BTreeMap::new();
    for ((dataset, metric, n_int), by_method) in &cells {
        let missing: Vec<&String> = methods.iter().filter(|m| !by_method.contains_key(*m)).collect();
        if !missing.is_empty() {
            return Err(Error::data(format!(
                "dataset `{dataset}`, {metric}, N_int {n_int}: no result for {}",
                missing.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(", ")
            )));
        }
        let means: Vec<f64> = methods.iter().map(|m| by_method[m].0 / by_method[m].1 as f64).collect();
        for (m, rank) in methods.iter().zip(tied_ranks(&means, metric.higher_is_better())) {
            let e = sums.entry((*metric, *n_int, m.clone())).or_insert((0.0, 0));
            e.0 += rank;
            e.1 += 1;
        }
    }
    Ok(RankTable {
        methods,
        rows: sums
            .into_iter()
            .map(|((metric, n_int, method), (s, c))| RankRow {
                metric,
                n_int,
                method,
                average_rank: s / c as f64,
                n_datasets: c,
            })
            .collect(),
    })
}

pub const OVERLAP_SIZE: usize = 8;

/// Proportion of shared interactions among the top 8 of each list. The
/// denominator shrinks to the larger list when either holds fewer than 8
/// (the result is then flagged).
pub fn overlap(a: &[FeatureSet], b: &[FeatureSet]) -> (f64, bool) {
    let a: BTreeSet<FeatureSet> = a.iter().take(OVERLAP_SIZE).copied().collect();
    let b: BTreeSet<FeatureSet> = b.iter().take(OVERLAP_SIZE).copied().collect();
    let flagged = a.len() < OVERLAP_SIZE || b.len() < OVERLAP_SIZE;
    let denom = a.len().max(b.len()).min(OVERLAP_SIZE);
    if denom == 0 {
        return (1.0, true);
    }
    (a.intersection(&b).count() as f64 / denom as f64, flagged)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapEntry {
    pub budget: usize,
    pub overlap: f64,
    pub flagged: bool,
}

/// Overlap of every budget's ranking with the one at `reference_budget`.
pub fn overlap_stability(rankings: &[(usize, Vec<FeatureSet>)], reference_budget: usize) -> Result<Vec<OverlapEntry>> {
    let reference = rankings
        .iter()
        .find(|(b, _)| *b == reference_budget)
        .ok_or_else(|| Error::invalid(format!("no ranking for reference budget {reference_budget}")))?;
    Ok(rankings
        .iter()
        .map(|(budget, r)| {
            let (overlap, flagged) = overlap(r, &reference.1);
            OverlapEntry {
                budget: *budget,
                overlap,
                flagged,
            }
        })
        .collect())
}
