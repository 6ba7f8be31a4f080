use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::{metrics, Metric};
use super::rank::{rank_methods, MetricRecord, MetricReport, RankTable, Timing};
use super::{write_csv, write_table, Cache};
use crate::data::{split, Dataset};
use crate::distill::{distill_indices, hex_digest, DistillConfig};
use crate::error::{Error, Result};
use crate::fourier::FeatureSet;
use crate::gam::{fast_select_pairs, fit_gam, GamTrainConfig};
use crate::indices::IndexKind;
use crate::learners::{LearnerSpec, Predictor};

/// An interaction-selection method compared in the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Method {
    /// Distillation scored by one interaction index.
    Index(IndexKind),
    /// Greedy residual pair search.
    Fast,
}

impl Method {
    pub fn all() -> Vec<Method> {
        IndexKind::ALL.into_iter().map(Method::Index).chain([Method::Fast]).collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Index(k) => k.name(),
            Method::Fast => "FAST",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("fast") {
            Ok(Method::Fast)
        } else {
            s.parse().map(Method::Index)
        }
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.name().to_string()
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    pub n_ints: Vec<usize>,
    pub seeds: Vec<u64>,
    pub test_fraction: f64,
    pub teacher: LearnerSpec,
    pub distill: DistillConfig,
    /// Shared by every method; only the interaction lists differ.
    pub gam: GamTrainConfig,
    pub fast_bins: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            methods: Method::all(),
            n_ints: (1..=8).collect(),
            seeds: vec![0],
            test_fraction: 0.3,
            teacher: LearnerSpec::from_name("gbt").expect("known learner"),
            distill: DistillConfig::default(),
            gam: GamTrainConfig::default(),
            fast_bins: 8,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.n_ints.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("methods, n_ints and seeds must be non-empty".into()));
        }
        if self.n_ints.contains(&0) {
            return Err(Error::Config("N_int values must be positive".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!("test fraction {} outside (0, 1)", self.test_fraction)));
        }
        self.distill.validate()?;
        self.gam.validate()
    }
}

#[derive(Debug, Clone)]
pub struct BenchDataset {
    pub name: String,
    pub data: Dataset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub dataset: String,
    pub seed: u64,
    /// `None` when the whole dataset cell failed (split or teacher).
    pub method: Option<String>,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct CellResult {
    records: Vec<MetricRecord>,
    timings: Vec<Timing>,
    failures: Vec<CellFailure>,
    /// Interactions handed to the GAM, per method and N_int.
    selections: BTreeMap<String, Vec<FeatureSet>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub report: MetricReport,
    pub ranks: RankTable,
    pub failures: Vec<CellFailure>,
    /// Digest of the GAM configuration used by every cell.
    pub gam_config_digest: String,
    pub n_datasets: usize,
    /// Full ranked selection per (dataset, seed, method).
    pub selections: BTreeMap<String, Vec<FeatureSet>>,
}

impl BenchReport {
    pub fn header(&self) -> String {
        format!(
            "{} methods (RuleFit not included), {} dataset(s); average ranks over a desk-scale dataset set are not comparable to published ranks",
            self.ranks.methods.len(),
            self.n_datasets
        )
    }
}

fn bench_cell(ds: &BenchDataset, seed: u64, cfg: &BenchConfig) -> CellResult {
    let mut out = CellResult::default();
    let fail = |out: &mut CellResult, method: Option<&str>, e: Error| {
        log::warn!("{} seed {seed} {}: {e}", ds.name, method.unwrap_or("cell"));
        out.failures.push(CellFailure {
            dataset: ds.name.clone(),
            seed,
            method: method.map(str::to_string),
            error: e.to_string(),
        });
    };
    let (train, test) = match split(&ds.data, 1.0 - cfg.test_fraction, seed) {
        Ok(s) => s,
        Err(e) => {
            fail(&mut out, None, e);
            return out;
        }
    };
    let max_int = *cfg.n_ints.iter().max().expect("validated non-empty");
    let gam_cfg = GamTrainConfig { seed, ..cfg.gam.clone() };

    // Ranked interaction lists per method.
    let mut ranked: BTreeMap<Method, (Vec<FeatureSet>, f64)> = BTreeMap::new();
    let kinds: Vec<IndexKind> = cfg
        .methods
        .iter()
        .filter_map(|m| match m {
            Method::Index(k) => Some(*k),
            Method::Fast => None,
        })
        .collect();
    if !kinds.is_empty() {
        let start = Instant::now();
        let res = cfg.teacher.clone().with_seed(seed).fit(&train).and_then(|teacher: Box<dyn Predictor>| {
            let dcfg = DistillConfig {
                n_int: max_int,
                seed,
                ..cfg.distill.clone()
            };
            distill_indices(&train, teacher.as_ref(), &dcfg, &kinds)
        });
        match res {
            Ok(outputs) => {
                let secs = start.elapsed().as_secs_f64();
                for (k, o) in kinds.iter().zip(outputs) {
                    ranked.insert(Method::Index(*k), (o.ranking.subsets(), secs));
                }
            }
            Err(e) => {
                for k in &kinds {
                    fail(&mut out, Some(k.name()), Error::Teacher(format!("distillation failed: {e}")));
                }
            }
        }
    }
    if cfg.methods.contains(&Method::Fast) {
        let start = Instant::now();
        let res = fit_gam(&train, &[], &gam_cfg).and_then(|base| fast_select_pairs(&train, &base, max_int, cfg.fast_bins));
        match res {
            Ok(pairs) => {
                ranked.insert(
                    Method::Fast,
                    (pairs.into_iter().map(|p| p.pair).collect(), start.elapsed().as_secs_f64()),
                );
            }
            Err(e) => fail(&mut out, Some("FAST"), e),
        }
    }

    // Identical interaction lists give identical GAMs, so each is fitted once.
    let mut fitted: BTreeMap<Vec<FeatureSet>, Result<BTreeMap<Metric, f64>>> = BTreeMap::new();
    for (method, (list, select_secs)) in &ranked {
        out.selections.insert(format!("{}/{seed}/{method}", ds.name), list.clone());
        let start = Instant::now();
        let mut method_failed = false;
        for &n_int in &cfg.n_ints {
            let chosen: Vec<FeatureSet> = list.iter().take(n_int).copied().collect();
            let m = fitted.entry(chosen.clone()).or_insert_with(|| {
                fit_gam(&train, &chosen, &gam_cfg)
                    .and_then(|g| g.predict(&test.features))
                    .and_then(|p| metrics(&p, &test.target, test.task))
            });
            match m {
                Ok(values) => {
                    for (&metric, &value) in values.iter() {
                        out.records.push(MetricRecord {
                            dataset: ds.name.clone(),
                            method: method.name().to_string(),
                            metric,
                            n_int,
                            seed,
                            value,
                        });
                    }
                }
                Err(e) if !method_failed => {
                    method_failed = true;
                    fail(&mut out, Some(method.name()), Error::Numerical(e.to_string()));
                }
                Err(_) => {}
            }
        }
        out.timings.push(Timing {
            dataset: ds.name.clone(),
            method: method.name().to_string(),
            seed,
            seconds: select_secs + start.elapsed().as_secs_f64(),
        });
    }
    out
}

/// Drops (dataset, metric, N_int) groups that some method is missing.
fn complete_groups(report: &MetricReport) -> MetricReport {
    let methods = report.methods();
    let mut present: BTreeMap<(String, Metric, usize), BTreeSet<String>> = BTreeMap::new();
    for r in &report.records {
        present
            .entry((r.dataset.clone(), r.metric, r.n_int))
            .or_default()
            .insert(r.method.clone());
    }
    let mut out = report.clone();
    out.records.retain(|r| {
        let ok = present[&(r.dataset.clone(), r.metric, r.n_int)] == methods;
        if !ok {
            log::warn!("excluding {} {} N_int {} from ranks: incomplete", r.dataset, r.metric, r.n_int);
        }
        ok
    });
    out
}

/// Every method × N_int on every dataset and seed, with a shared GAM trainer.
pub fn run_benchmark(datasets: &[BenchDataset], cfg: &BenchConfig, cache: &Cache) -> Result<BenchReport> {
    cfg.validate()?;
    if datasets.len() < 2 {
        log::warn!("ranks over fewer than two datasets carry little information");
    }
    let names: BTreeSet<&str> = datasets.iter().map(|d| d.name.as_str()).collect();
    if names.len() != datasets.len() {
        return Err(Error::Config("benchmark dataset names must be unique".into()));
    }
    let mut report = MetricReport {
        seeds: cfg.seeds.clone(),
        ..Default::default()
    };
    let mut failures = Vec::new();
    let mut selections = BTreeMap::new();
    let key_cfg = BenchConfig {
        seeds: Vec::new(),
        ..cfg.clone()
    };
    for ds in datasets {
        let data_digest = hex_digest(&serde_json::to_vec(&ds.data)?);
        for &seed in &cfg.seeds {
            let key = Cache::key(&("bench", &ds.name, &data_digest, seed, &key_cfg));
            let cell: CellResult = cache.get_or_compute(&key, || Ok(bench_cell(ds, seed, cfg)))?;
            log::info!("benchmark {} seed {seed}: {} records", ds.name, cell.records.len());
            report.records.extend(cell.records);
            report.timings.extend(cell.timings);
            failures.extend(cell.failures);
            selections.extend(cell.selections);
        }
    }
    report.sort();
    let ranks = rank_methods(&complete_groups(&report))?;
    Ok(BenchReport {
        report,
        ranks,
        failures,
        gam_config_digest: Cache::key(&cfg.gam),
        n_datasets: datasets.len(),
        selections,
    })
}

/// `report.csv` (long format), `ranks.csv`, one `ranks_<metric>.csv` per
/// metric (rows N_int, columns methods) and `summary.json`.
pub fn write_benchmark(dir: &Path, b: &BenchReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_csv(&dir.join("report.csv"), &b.report.records)?;
    write_csv(&dir.join("timings.csv"), &b.report.timings)?;
    write_csv(&dir.join("ranks.csv"), &b.ranks.rows)?;
    let metrics: BTreeSet<Metric> = b.ranks.rows.iter().map(|r| r.metric).collect();
    for metric in metrics {
        let n_ints: BTreeSet<usize> = b.ranks.rows.iter().filter(|r| r.metric == metric).map(|r| r.n_int).collect();
        let mut header = vec!["n_int".to_string()];
        header.extend(b.ranks.methods.iter().cloned());
        let rows: Vec<Vec<String>> = n_ints
            .into_iter()
            .map(|n| {
                let mut row = vec![n.to_string()];
                row.extend(
                    b.ranks
                        .methods
                        .iter()
                        .map(|m| b.ranks.get(metric, n, m).map_or(String::new(), |v| format!("{v:.4}"))),
                );
                row
            })
            .collect();
        write_table(&dir.join(format!("ranks_{}.csv", metric.name())), &header, &rows)?;
    }
    let summary = serde_json::json!({
        "header": b.header(),
        "n_datasets": b.n_datasets,
        "methods": b.ranks.methods,
        "gam_config_digest": b.gam_config_digest,
        "failures": b.failures,
        "selections": b.selections.iter().map(|(k, v)| (k.clone(), v.iter().map(|s| s.indices()).collect::<Vec<_>>())).collect::<BTreeMap<_, _>>(),
    });
    let path = dir.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(&summary)?).map_err(|e| Error::io(&path, e))
}
