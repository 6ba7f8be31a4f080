//! Metrics, method ranking, stability analysis, and the experiment runners.
//!
//! Runners split work into independent cells (one dataset or grid point
//! under one seed). Finished cells are stored in a content-addressed
//! [`Cache`], so an interrupted run resumes where it stopped.

mod bench;
mod metrics;
mod rank;
mod scenario;
mod stability;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::distill::hex_digest;
use crate::error::{Error, Result};

pub use bench::{run_benchmark, write_benchmark, BenchConfig, BenchDataset, BenchReport, CellFailure, Method};
pub use metrics::{accuracy, auroc, auroc_binary, f1, mae, metrics, mse, r2, Metric};
pub use rank::{
    overlap, overlap_stability, rank_methods, tied_ranks, MetricRecord, MetricReport, OverlapEntry, RankRow, RankTable,
    Timing, OVERLAP_SIZE,
};
pub use scenario::{
    run_scenario_a, run_scenario_b, scenario_a_recovery, summarize_scenario_a, summarize_scenario_b, write_scenario_a,
    write_scenario_b, Recovery, ScenarioAConfig, ScenarioALearner, ScenarioARow, ScenarioBConfig, ScenarioBRow,
    ScenarioBSummary, SummaryRow, Student,
};
pub use stability::{run_stability, write_stability, StabilityConfig, StabilityRow};

/// Directory of finished cells keyed by the digest of everything that
/// determines them. A disabled cache recomputes everything.
#[derive(Debug, Default)]
pub struct Cache {
    dir: Option<PathBuf>,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl Cache {
    pub fn disabled() -> Self {
        Self::default()
    }

    pub fn at(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self {
            dir: Some(dir),
            ..Default::default()
        })
    }

    /// Hex SHA-256 of the JSON encoding of `parts`.
    pub fn key<T: Serialize + ?Sized>(parts: &T) -> String {
        hex_digest(serde_json::to_string(parts).expect("cache key serializes").as_bytes())
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.json")))
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Option<T> {
        let text = fs::read_to_string(self.path(key)?).ok()?;
        match serde_json::from_str(&text) {
            Ok(v) => Some(v),
            Err(e) => {
                log::warn!("ignoring unreadable cache entry {key}: {e}");
                None
            }
        }
    }

    pub fn put<T: Serialize>(&self, key: &str, value: &T) -> Result<()> {
        let Some(path) = self.path(key) else { return Ok(()) };
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, serde_json::to_vec(value)?).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    /// Cached value for `key`, computing and storing it on a miss.
    pub fn get_or_compute<T, F>(&self, key: &str, compute: F) -> Result<T>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<T>,
    {
        if let Some(v) = self.get(key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(v);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let v = compute()?;
        self.put(key, &v)?;
        Ok(v)
    }
}

/// Writes serializable rows as a headed CSV file.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes a CSV from a header and string records.
pub fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
    (m, var.sqrt())
}
