use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::rank::{overlap_stability, OverlapEntry, OVERLAP_SIZE};
use super::{write_table, Cache};
use crate::data::Dataset;
use crate::distill::{distill_indices, DistillConfig};
use crate::error::{Error, Result};
use crate::fourier::FeatureSet;
use crate::indices::IndexKind;
use crate::learners::LearnerSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    /// Number of explained samples per run.
    pub sample_sizes: Vec<usize>,
    pub reference_size: usize,
    pub indices: Vec<IndexKind>,
    pub teacher: LearnerSpec,
    pub distill: DistillConfig,
    pub seed: u64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            sample_sizes: vec![100, 200, 300, 400, 500],
            reference_size: 500,
            indices: IndexKind::ALL.to_vec(),
            teacher: LearnerSpec::from_name("gbt").expect("known learner"),
            distill: DistillConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub method: String,
    pub entries: Vec<OverlapEntry>,
    /// Top interactions at the reference size.
    pub reference: Vec<FeatureSet>,
}

fn rankings_at(
    train: &Dataset,
    teacher: &dyn crate::learners::Predictor,
    cfg: &StabilityConfig,
    size: usize,
    cache: &Cache,
) -> Result<Vec<Vec<FeatureSet>>> {
    let dcfg = DistillConfig {
        n_explain: Some(size),
        n_int: OVERLAP_SIZE,
        seed: cfg.seed,
        ..cfg.distill.clone()
    };
    let key = Cache::key(&("stability", crate::distill::hex_digest(&serde_json::to_vec(train)?), &cfg.teacher, cfg.seed, &dcfg, &cfg.indices));
    cache.get_or_compute(&key, || {
        Ok(distill_indices(train, teacher, &dcfg, &cfg.indices)?
            .into_iter()
            .map(|o| o.ranking.subsets())
            .collect())
    })
}

/// Overlap of each index's top-8 interactions at every sample size with its
/// own top-8 at the reference size. The reference is recomputed separately
/// from the sweep, so the reference column also checks determinism.
pub fn run_stability(train: &Dataset, cfg: &StabilityConfig, cache: &Cache) -> Result<Vec<StabilityRow>> {
    cfg.distill.validate()?;
    if cfg.sample_sizes.is_empty() || cfg.indices.is_empty() {
        return Err(Error::Config("sample sizes and indices must be non-empty".into()));
    }
    let teacher = cfg.teacher.clone().with_seed(cfg.seed).fit(train)?;
    let reference = rankings_at(train, teacher.as_ref(), cfg, cfg.reference_size, &Cache::disabled())?;
    let mut sweep = Vec::new();
    for &size in &cfg.sample_sizes {
        sweep.push((size, rankings_at(train, teacher.as_ref(), cfg, size, cache)?));
        log::info!("stability sample size {size} done");
    }
    cfg.indices
        .iter()
        .enumerate()
        .map(|(i, kind)| {
            // The reference enters under a budget no sweep entry uses.
            let mut lists: Vec<(usize, Vec<FeatureSet>)> =
                sweep.iter().map(|(size, r)| (*size, r[i].clone())).collect();
            lists.push((usize::MAX, reference[i].clone()));
            let mut entries = overlap_stability(&lists, usize::MAX)?;
            entries.pop();
            Ok(StabilityRow {
                method: kind.name().to_string(),
                entries,
                reference: reference[i].clone(),
            })
        })
        .collect()
}

/// Table with one row per index and one column per sample size.
pub fn write_stability(dir: &Path, rows: &[StabilityRow]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let sizes: Vec<usize> = rows.first().map(|r| r.entries.iter().map(|e| e.budget).collect()).unwrap_or_default();
    let mut header = vec!["method".to_string()];
    header.extend(sizes.iter().map(usize::to_string));
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut row = vec![r.method.clone()];
            row.extend(
                r.entries
                    .iter()
                    .map(|e| format!("{:.2}{}", e.overlap, if e.flagged { "*" } else { "" })),
            );
            row
        })
        .collect();
    write_table(&dir.join("stability.csv"), &header, &table)?;
    let path = dir.join("stability.json");
    fs::write(&path, serde_json::to_string_pretty(rows)?).map_err(|e| Error::io(&path, e))
}
