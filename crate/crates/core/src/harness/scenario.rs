use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{metrics, r2, Metric};
use super::{mean_std, write_csv, Cache};
use crate::distill::{distill, DistillConfig, InteractionRanking};
use crate::error::{Error, Result};
use crate::fourier::FeatureSet;
use crate::gam::{fast_select_pairs, fit_gam, GamTrainConfig};
use crate::learners::{train_forest, train_gbt, train_knn, train_ridge_cv, ForestConfig, GbtConfig, Predictor, DEFAULT_ALPHAS};
use crate::synthetic::{gen_cluster_classification, gen_fourier_sparse, make_tree_task, FourierTask, ScenarioACell};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioALearner {
    Ridge,
    Forest,
    Knn,
    Gbt,
    /// GAM fed the interactions distilled from the GBT teacher.
    Gam,
}

impl ScenarioALearner {
    pub const ALL: [ScenarioALearner; 5] = [
        ScenarioALearner::Ridge,
        ScenarioALearner::Forest,
        ScenarioALearner::Knn,
        ScenarioALearner::Gbt,
        ScenarioALearner::Gam,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioALearner::Ridge => "ridge",
            ScenarioALearner::Forest => "forest",
            ScenarioALearner::Knn => "knn",
            ScenarioALearner::Gbt => "gbt",
            ScenarioALearner::Gam => "gam",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioAConfig {
    pub learners: Vec<ScenarioALearner>,
    pub seeds: Vec<u64>,
    /// Teacher for distillation, also reported as the `gbt` learner.
    pub teacher: GbtConfig,
    pub distill: DistillConfig,
    pub gam: GamTrainConfig,
}

impl Default for ScenarioAConfig {
    fn default() -> Self {
        Self {
            learners: ScenarioALearner::ALL.to_vec(),
            seeds: (0..20).collect(),
            teacher: GbtConfig::default(),
            distill: DistillConfig {
                n_int: 3,
                ..DistillConfig::default()
            },
            gam: GamTrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioARow {
    pub experiment: u8,
    pub n: usize,
    pub k: usize,
    pub sigma: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub learner: String,
    pub seed: u64,
    pub r2: f64,
    /// Generating interactions found in the distilled top 3 (`gam` rows only).
    pub hits: Option<usize>,
    pub n_generating: usize,
}

/// How well a distilled ranking recovers the generating interactions of a task.
#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub ranking: InteractionRanking,
    /// Generating subsets with at least two features.
    pub generating: Vec<FeatureSet>,
    /// Generating subsets among the top 3 of the ranking.
    pub hits: usize,
    pub teacher_r2: f64,
}

impl Recovery {
    /// At least two generating interactions (or all of them, if fewer) in the top 3.
    pub fn success(&self) -> bool {
        self.hits >= self.generating.len().min(2)
    }
}

fn recovery_of(task: &FourierTask, teacher: &dyn Predictor, cfg: &DistillConfig) -> Result<Recovery> {
    let out = distill(&task.train, teacher, cfg)?;
    let generating = task.interactions();
    let top = out.full.top(3);
    let hits = generating.iter().filter(|s| top.contains(s)).count();
    let teacher_r2 = r2(&teacher.predict(&task.test.features)?.point(), &task.test.target);
    Ok(Recovery {
        ranking: out.full,
        generating,
        hits,
        teacher_r2,
    })
}

/// Trains the GBT teacher on the task and distills it.
pub fn scenario_a_recovery(task: &FourierTask, teacher: &GbtConfig, cfg: &DistillConfig) -> Result<Recovery> {
    let t = train_gbt(&task.train, &GbtConfig { seed: task.seed, ..teacher.clone() })?;
    recovery_of(task, &t, &DistillConfig { seed: task.seed, ..cfg.clone() })
}

fn scenario_a_cell(cell: &ScenarioACell, seed: u64, cfg: &ScenarioAConfig) -> Result<Vec<ScenarioARow>> {
    let task = gen_fourier_sparse(cell.n, cell.k, cell.sigma, cell.n_train, cell.n_test, seed)?;
    let n_generating = task.interactions().len();
    let mut rows = Vec::new();
    let need_gbt = cfg
        .learners
        .iter()
        .any(|l| matches!(l, ScenarioALearner::Gbt | ScenarioALearner::Gam));
    let gbt = if need_gbt {
        Some(train_gbt(&task.train, &GbtConfig { seed, ..cfg.teacher.clone() })?)
    } else {
        None
    };
    for &learner in &cfg.learners {
        let (model, hits): (Box<dyn Predictor>, Option<usize>) = match learner {
            ScenarioALearner::Ridge => (Box::new(train_ridge_cv(&task.train, &DEFAULT_ALPHAS)?), None),
            ScenarioALearner::Forest => (
                Box::new(train_forest(&task.train, &ForestConfig { seed, ..Default::default() })?),
                None,
            ),
            ScenarioALearner::Knn => (Box::new(train_knn(&task.train, 5)?), None),
            ScenarioALearner::Gbt => (Box::new(gbt.clone().expect("trained above")), None),
            ScenarioALearner::Gam => {
                let teacher = gbt.as_ref().expect("trained above");
                let rec = recovery_of(&task, teacher, &DistillConfig { seed, ..cfg.distill.clone() })?;
                let interactions = rec.ranking.top(cfg.distill.n_int);
                let gam = fit_gam(&task.train, &interactions, &GamTrainConfig { seed, ..cfg.gam.clone() })?;
                (Box::new(gam), Some(rec.hits))
            }
        };
        let pred = model.predict(&task.test.features)?.point();
        rows.push(ScenarioARow {
            experiment: cell.experiment,
            n: cell.n,
            k: cell.k,
            sigma: cell.sigma,
            n_train: cell.n_train,
            n_test: cell.n_test,
            learner: learner.name().to_string(),
            seed,
            r2: r2(&pred, &task.test.target),
            hits,
            n_generating,
        });
    }
    Ok(rows)
}

/// Test R² of every learner on every grid cell and seed.
pub fn run_scenario_a(cells: &[ScenarioACell], cfg: &ScenarioAConfig, cache: &Cache) -> Result<Vec<ScenarioARow>> {
    cfg.distill.validate()?;
    cfg.gam.validate()?;
    let mut rows = Vec::new();
    for cell in cells {
        for &seed in &cfg.seeds {
            let key = Cache::key(&("scenario_a", cell, seed, ScenarioAConfig { seeds: Vec::new(), ..cfg.clone() }));
            let got: Vec<ScenarioARow> = cache.get_or_compute(&key, || scenario_a_cell(cell, seed, cfg))?;
            log::info!("scenario A exp {} cell {:?} seed {seed} done", cell.experiment, cell);
            rows.extend(got);
        }
    }
    Ok(rows)
}

/// Mean and spread of a score per experiment, x-axis value and learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: u8,
    pub x_name: String,
    pub x_value: f64,
    pub learner: String,
    pub mean: f64,
    pub std: f64,
    pub n_seeds: usize,
}

fn x_axis(r: &ScenarioARow) -> (&'static str, f64) {
    match r.experiment {
        1 => ("n_train", r.n_train as f64),
        2 => ("sigma", r.sigma),
        _ => ("k", r.k as f64),
    }
}

/// Mean test R² per panel point, in grid order.
pub fn summarize_scenario_a(rows: &[ScenarioARow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(u8, u64, String), Vec<f64>> = BTreeMap::new();
    for r in rows {
        let (_, x) = x_axis(r);
        groups
            .entry((r.experiment, x.to_bits(), r.learner.clone()))
            .or_default()
            .push(r.r2);
    }
    let mut out: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((experiment, xb, learner), v)| {
            let x_value = f64::from_bits(xb);
            let (mean, std) = mean_std(&v);
            SummaryRow {
                experiment,
                x_name: match experiment {
                    1 => "n_train",
                    2 => "sigma",
                    _ => "k",
                }
                .to_string(),
                x_value,
                learner,
                mean,
                std,
                n_seeds: v.len(),
            }
        })
        .collect();
    out.sort_by(|a, b| {
        (a.experiment, a.x_value, &a.learner)
            .partial_cmp(&(b.experiment, b.x_value, &b.learner))
            .expect("finite axis values")
    });
    out
}

/// One long CSV per experiment plus a summary with one row per panel point.
pub fn write_scenario_a(dir: &Path, rows: &[ScenarioARow]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for exp in 1..=3u8 {
        let part: Vec<&ScenarioARow> = rows.iter().filter(|r| r.experiment == exp).collect();
        if !part.is_empty() {
            write_csv(&dir.join(format!("scenario_a_exp{exp}.csv")), &part)?;
        }
    }
    write_csv(&dir.join("scenario_a_summary.csv"), &summarize_scenario_a(rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Student {
    /// Univariate terms only.
    Additive,
    /// Plus the distilled interactions of the tree teacher.
    Distilled,
    /// Plus greedy residual pairs.
    Fast,
}

impl Student {
    pub const ALL: [Student; 3] = [Student::Additive, Student::Distilled, Student::Fast];

    pub fn name(self) -> &'static str {
        match self {
            Student::Additive => "additive",
            Student::Distilled => "distilled",
            Student::Fast => "fast",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioBConfig {
    pub n: usize,
    pub p: usize,
    pub p_inf: usize,
    pub depths: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Interaction budget for the distilled and FAST students.
    pub n_int: usize,
    pub distill: DistillConfig,
    pub gam: GamTrainConfig,
    pub fast_bins: usize,
}

impl Default for ScenarioBConfig {
    fn default() -> Self {
        Self {
            n: 10_000,
            p: 15,
            p_inf: 10,
            depths: (1..=10).collect(),
            seeds: (0..20).collect(),
            n_int: 10,
            distill: DistillConfig::default(),
            gam: GamTrainConfig::default(),
            fast_bins: 8,
        }
    }
}

impl ScenarioBConfig {
    /// Reduced sample size for quick runs.
    pub fn fast() -> Self {
        Self {
            n: 2_000,
            seeds: (0..10).collect(),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioBRow {
    pub depth: usize,
    pub seed: u64,
    pub student: String,
    /// Agreement with the teacher's pseudo-labels on the test split.
    pub accuracy: f64,
    pub auroc: Option<f64>,
    pub f1: f64,
    pub n_interactions: usize,
    pub teacher_leaves: usize,
    pub seconds: f64,
}

fn scenario_b_cell(depth: usize, seed: u64, cfg: &ScenarioBConfig) -> Result<Vec<ScenarioBRow>> {
    let data = gen_cluster_classification(cfg.n, cfg.p, cfg.p_inf, seed)?;
    let task = make_tree_task(&data, depth, seed)?;
    let gam_cfg = GamTrainConfig { seed, ..cfg.gam.clone() };
    let mut rows = Vec::new();
    let mut additive = None;
    for student in Student::ALL {
        let start = std::time::Instant::now();
        let interactions = match student {
            Student::Additive => Vec::new(),
            Student::Distilled => {
                let d = DistillConfig {
                    n_int: cfg.n_int,
                    seed,
                    ..cfg.distill.clone()
                };
                distill(&task.train, &task.teacher, &d)?.ranking.subsets()
            }
            Student::Fast => {
                let base = match &additive {
                    Some(m) => m,
                    None => return Err(Error::invalid("additive student must run first")),
                };
                fast_select_pairs(&task.train, base, cfg.n_int, cfg.fast_bins)?
                    .into_iter()
                    .map(|s| s.pair)
                    .collect()
            }
        };
        let model = fit_gam(&task.train, &interactions, &gam_cfg)?;
        let m = metrics(&model.predict(&task.test.features)?, &task.test.target, task.test.task)?;
        rows.push(ScenarioBRow {
            depth,
            seed,
            student: student.name().to_string(),
            accuracy: m[&Metric::Accuracy],
            auroc: m.get(&Metric::Auroc).copied(),
            f1: m[&Metric::F1],
            n_interactions: interactions.len(),
            teacher_leaves: task.teacher.n_leaves(),
            seconds: start.elapsed().as_secs_f64(),
        });
        if student == Student::Additive {
            additive = Some(model);
        }
    }
    Ok(rows)
}

/// Fidelity of the three students to depth-`D` tree teachers.
pub fn run_scenario_b(cfg: &ScenarioBConfig, cache: &Cache) -> Result<Vec<ScenarioBRow>> {
    cfg.distill.validate()?;
    cfg.gam.validate()?;
    let mut rows = Vec::new();
    for &depth in &cfg.depths {
        for &seed in &cfg.seeds {
            let key = Cache::key(&("scenario_b", depth, seed, ScenarioBConfig { seeds: Vec::new(), depths: Vec::new(), ..cfg.clone() }));
            let got: Vec<ScenarioBRow> = cache.get_or_compute(&key, || scenario_b_cell(depth, seed, cfg))?;
            log::info!("scenario B depth {depth} seed {seed} done");
            rows.extend(got);
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioBSummary {
    pub depth: usize,
    pub student: String,
    pub accuracy: f64,
    pub accuracy_std: f64,
    pub auroc: f64,
    pub f1: f64,
    pub n_seeds: usize,
}

pub fn summarize_scenario_b(rows: &[ScenarioBRow]) -> Vec<ScenarioBSummary> {
    let mut groups: BTreeMap<(usize, String), Vec<&ScenarioBRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.depth, r.student.clone())).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((depth, student), v)| {
            let acc: Vec<f64> = v.iter().map(|r| r.accuracy).collect();
            let auc: Vec<f64> = v.iter().filter_map(|r| r.auroc).collect();
            let f1: Vec<f64> = v.iter().map(|r| r.f1).collect();
            let (accuracy, accuracy_std) = mean_std(&acc);
            ScenarioBSummary {
                depth,
                student,
                accuracy,
                accuracy_std,
                auroc: mean_std(&auc).0,
                f1: mean_std(&f1).0,
                n_seeds: v.len(),
            }
        })
        .collect()
}

pub fn write_scenario_b(dir: &Path, rows: &[ScenarioBRow]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_csv(&dir.join("scenario_b.csv"), rows)?;
    write_csv(&dir.join("scenario_b_summary.csv"), &summarize_scenario_b(rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_a_row_accounting() {
        let cells = [ScenarioACell {
            experiment: 2,
            n: 6,
            k: 2,
            sigma: 0.1,
            n_train: 80,
            n_test: 40,
        }];
        let cfg = ScenarioAConfig {
            learners: vec![ScenarioALearner::Ridge, ScenarioALearner::Knn],
            seeds: vec![1, 2, 3],
            ..Default::default()
        };
        let rows = run_scenario_a(&cells, &cfg, &Cache::disabled()).unwrap();
        assert_eq!(rows.len(), 1 * 2 * 3);
        let s = summarize_scenario_a(&rows);
        assert_eq!(s.len(), 2);
        assert!(s.iter().all(|r| r.n_seeds == 3 && r.x_name == "sigma"));
    }
}
