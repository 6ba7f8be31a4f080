//! Command-line front end.
//!
//! Every command resolves its configuration (JSON file, then flags on top),
//! validates it, and only then creates the output directory, writing the
//! resolved `config.json` next to its results. Exit codes: 1 configuration
//! or usage error, 2 data error, 3 teacher error.

use std::fs;
use std::io::{self, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::{load_csv, split, Dataset, Task};
use crate::distill::{distill, ranking_from_json, DistillConfig};
use crate::error::{Error, Result};
use crate::fourier::FeatureSet;
use crate::gam::{fit_gam, predict_gam, GamTrainConfig};
use crate::harness::{
    metrics, run_benchmark, run_scenario_a, run_scenario_b, run_stability, write_benchmark, write_csv,
    write_scenario_a, write_scenario_b, write_stability, BenchConfig, BenchDataset, Cache, Method, MetricRecord,
    ScenarioAConfig, ScenarioBConfig, StabilityConfig,
};
use crate::indices::IndexKind;
use crate::learners::protocol::{serve, Fault};
use crate::learners::{ExternalConfig, ExternalTeacher, LearnerSpec, Predictor};
use crate::synthetic::scenario_a_grids;

/// Environment variable holding the default worker count.
pub const JOBS_ENV: &str = "GAM_DISTILL_JOBS";

#[derive(Debug, Parser)]
#[command(name = "gam-distill", version, about = "Distill interactions from a black-box model into a GAM")]
pub struct Cli {
    /// Worker threads (default: $GAM_DISTILL_JOBS, else all cores).
    #[arg(long, global = true, env = JOBS_ENV)]
    pub jobs: Option<usize>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Rank interactions of a teacher fitted on a CSV file.
    Distill(DistillArgs),
    /// Fit a GAM with given interactions and report test metrics.
    Fit(FitArgs),
    /// Compare interaction-selection methods over several datasets.
    Bench(BenchArgs),
    /// Synthetic experiments.
    Scenario {
        #[command(subcommand)]
        which: ScenarioCmd,
    },
    /// Top-8 overlap across explanation sample sizes.
    Stability(StabilityArgs),
    /// Serve a built-in learner over the teacher protocol.
    #[command(alias = "bridge")]
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum ScenarioCmd {
    /// Sparse parity functions: recovery and learner comparison.
    A(ScenarioAArgs),
    /// Tree-teacher fidelity over tree depth.
    B(ScenarioBArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Target column name.
    #[arg(long)]
    pub target: Option<String>,
    /// regression, binary or multiclass (default: inferred).
    #[arg(long)]
    pub task: Option<Task>,
}

#[derive(Debug, Clone, Args)]
pub struct TeacherArgs {
    /// Built-in teacher: gbt, forest, cart, ridge, knn or echo.
    #[arg(long)]
    pub teacher: Option<String>,
    /// Shell command starting an external teacher on stdin/stdout.
    #[arg(long)]
    pub teacher_cmd: Option<String>,
    /// host:port of an external teacher.
    #[arg(long)]
    pub teacher_addr: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct DistillFlags {
    #[arg(long)]
    pub index: Option<IndexKind>,
    #[arg(long)]
    pub n_int: Option<usize>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub max_order: Option<usize>,
    /// Samples explained.
    #[arg(long)]
    pub n_explain: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct DistillArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub teacher: TeacherArgs,
    #[command(flatten)]
    pub distill: DistillFlags,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    /// Ranking file written by `distill`.
    #[arg(long)]
    pub ranking: Option<PathBuf>,
    /// Explicit interactions, e.g. "0,1;2,3,4".
    #[arg(long)]
    pub interactions: Option<String>,
    /// Use the top N interactions of the ranking.
    #[arg(long)]
    pub n_int: Option<usize>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset CSV (repeatable); all share `--target`.
    #[arg(long)]
    pub data: Vec<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub task: Option<Task>,
    /// Comma-separated methods (index names and FAST).
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    /// Comma-separated interaction budgets.
    #[arg(long, value_delimiter = ',')]
    pub n_ints: Option<Vec<usize>>,
    /// Number of seeds (0..N).
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub teacher: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioAArgs {
    #[command(flatten)]
    pub common: Common,
    /// Run one experiment (1, 2 or 3) instead of all three.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub experiment: Option<u8>,
    /// Number of seeds (0..N).
    #[arg(long)]
    pub seeds: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioBArgs {
    #[command(flatten)]
    pub common: Common,
    /// N=2000 and 10 seeds.
    #[arg(long)]
    pub fast: bool,
    #[arg(long, value_delimiter = ',')]
    pub depths: Option<Vec<usize>>,
    /// Number of seeds (0..N).
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated explanation sample sizes.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub reference: Option<usize>,
    #[arg(long)]
    pub teacher: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FaultArg {
    ExitOnPredict,
    FailFirstPredict,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    /// Built-in learner to serve.
    #[arg(long, default_value = "echo")]
    pub learner: String,
    /// Listen on host:port instead of stdin/stdout.
    #[arg(long)]
    pub listen: Option<String>,
    #[arg(long, hide = true)]
    pub fault: Option<FaultArg>,
}

// Resolved configurations, archived as config.json.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TeacherSpec {
    pub builtin: LearnerSpec,
    /// External teacher command (stdio transport).
    pub command: Option<String>,
    /// External teacher address (TCP transport).
    pub address: Option<String>,
}

impl Default for TeacherSpec {
    fn default() -> Self {
        Self {
            builtin: LearnerSpec::from_name("gbt").expect("known learner"),
            command: None,
            address: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSpec {
    pub path: Option<PathBuf>,
    pub target: Option<String>,
    pub task: Option<Task>,
}

impl DataSpec {
    fn check(&self) -> Result<()> {
        if self.path.is_none() {
            return Err(Error::Config("no dataset given (--data)".into()));
        }
        if self.target.is_none() {
            return Err(Error::Config("no target column given (--target)".into()));
        }
        Ok(())
    }

    fn load(&self) -> Result<Dataset> {
        self.check()?;
        load_csv(self.path.as_ref().expect("checked"), self.target.as_ref().expect("checked"), self.task)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistillRun {
    pub data: DataSpec,
    pub teacher: TeacherSpec,
    pub distill: DistillConfig,
    pub out: PathBuf,
}

impl Default for DistillRun {
    fn default() -> Self {
        Self {
            data: DataSpec::default(),
            teacher: TeacherSpec::default(),
            distill: DistillConfig::default(),
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitRun {
    pub data: DataSpec,
    pub ranking: Option<PathBuf>,
    pub interactions: Option<Vec<FeatureSet>>,
    pub n_int: Option<usize>,
    pub test_fraction: f64,
    pub seed: u64,
    pub gam: GamTrainConfig,
    pub out: PathBuf,
}

impl Default for FitRun {
    fn default() -> Self {
        Self {
            data: DataSpec::default(),
            ranking: None,
            interactions: None,
            n_int: None,
            test_fraction: 0.3,
            seed: 0,
            gam: GamTrainConfig::default(),
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchDataSpec {
    pub path: PathBuf,
    pub target: String,
    #[serde(default)]
    pub task: Option<Task>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchRun {
    pub datasets: Vec<BenchDataSpec>,
    pub bench: BenchConfig,
    pub out: PathBuf,
}

impl Default for BenchRun {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            bench: BenchConfig::default(),
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioARun {
    pub experiments: Vec<u8>,
    pub scenario: ScenarioAConfig,
    pub out: PathBuf,
}

impl Default for ScenarioARun {
    fn default() -> Self {
        Self {
            experiments: vec![1, 2, 3],
            scenario: ScenarioAConfig::default(),
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioBRun {
    pub scenario: ScenarioBConfig,
    pub out: PathBuf,
}

impl Default for ScenarioBRun {
    fn default() -> Self {
        Self {
            scenario: ScenarioBConfig::default(),
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityRun {
    pub data: DataSpec,
    pub stability: StabilityConfig,
    pub out: PathBuf,
}

impl Default for StabilityRun {
    fn default() -> Self {
        Self {
            data: DataSpec::default(),
            stability: StabilityConfig::default(),
            out: PathBuf::from("out"),
        }
    }
}

/// Parses `"0,1;2,3,4"` into feature sets.
pub fn parse_interactions(s: &str) -> Result<Vec<FeatureSet>> {
    s.split(';')
        .map(str::trim)
        .filter(|g| !g.is_empty())
        .map(|g| {
            let idx: Vec<usize> = g
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("bad feature index `{}` in `{g}`", t.trim())))
                })
                .collect::<Result<_>>()?;
            if idx.len() < 2 {
                return Err(Error::Config(format!("interaction `{g}` needs at least two features")));
            }
            FeatureSet::from_indices(idx).map_err(|e| Error::Config(e.to_string()))
        })
        .collect()
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn apply_data(spec: &mut DataSpec, a: &DataArgs) {
    if let Some(p) = &a.data {
        spec.path = Some(p.clone());
    }
    if let Some(t) = &a.target {
        spec.target = Some(t.clone());
    }
    if a.task.is_some() {
        spec.task = a.task;
    }
}

fn apply_teacher(spec: &mut TeacherSpec, a: &TeacherArgs) -> Result<()> {
    if let Some(name) = &a.teacher {
        spec.builtin = LearnerSpec::from_name(name)?;
    }
    if a.teacher_cmd.is_some() {
        spec.command = a.teacher_cmd.clone();
    }
    if a.teacher_addr.is_some() {
        spec.address = a.teacher_addr.clone();
    }
    if spec.command.is_some() && spec.address.is_some() {
        return Err(Error::Config("give either --teacher-cmd or --teacher-addr, not both".into()));
    }
    Ok(())
}

fn seeds(n: u64) -> Vec<u64> {
    (0..n).collect()
}

/// Creates the output directory, archives the config and starts file logging.
fn prepare_out<T: Serialize>(out: &Path, cfg: &T) -> Result<()> {
    fs::create_dir_all(out.join("logs")).map_err(|e| Error::io(out, e))?;
    let path = out.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(cfg)?).map_err(|e| Error::io(&path, e))?;
    let log = out.join("logs").join("run.log");
    let file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&log)
        .map_err(|e| Error::io(&log, e))?;
    if let Ok(mut slot) = LOG_FILE.lock() {
        *slot = Some(file);
    }
    Ok(())
}

static LOG_FILE: Mutex<Option<fs::File>> = Mutex::new(None);

/// Copies log output to stderr and, once the output directory exists, to its log file.
struct Tee;

impl Write for Tee {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        io::stderr().write_all(buf)?;
        if let Ok(mut slot) = LOG_FILE.lock() {
            if let Some(f) = slot.as_mut() {
                f.write_all(buf)?;
            }
        }
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        io::stderr().flush()
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Pipe(Box::new(Tee)))
        .try_init();
}

fn build_teacher(spec: &TeacherSpec, train: &Dataset, seed: u64) -> Result<Box<dyn Predictor>> {
    let external = match (&spec.command, &spec.address) {
        (Some(cmd), _) => Some(ExternalTeacher::spawn(cmd, ExternalConfig::default())?),
        (None, Some(addr)) => Some(ExternalTeacher::connect(addr, ExternalConfig::default())?),
        _ => None,
    };
    match external {
        Some(mut t) => {
            t.fit(train)?;
            Ok(Box::new(t))
        }
        None => spec.builtin.clone().with_seed(seed).fit(train),
    }
}

fn cmd_distill(a: &DistillArgs) -> Result<()> {
    let mut run: DistillRun = load_config(a.common.config.as_deref())?;
    apply_data(&mut run.data, &a.data);
    apply_teacher(&mut run.teacher, &a.teacher)?;
    let f = &a.distill;
    let d = &mut run.distill;
    if let Some(v) = f.index {
        d.index = v;
    }
    if let Some(v) = f.n_int {
        d.n_int = v;
    }
    if let Some(v) = f.budget {
        d.budget = v;
    }
    if let Some(v) = f.max_order {
        d.max_order = v;
    }
    if f.n_explain.is_some() {
        d.n_explain = f.n_explain;
    }
    if let Some(s) = a.common.seed {
        d.seed = s;
    }
    if let Some(o) = &a.common.out {
        run.out = o.clone();
    }
    run.data.check()?;
    run.distill.validate()?;

    let data = run.data.load()?;
    prepare_out(&run.out, &run)?;
    let teacher = build_teacher(&run.teacher, &data, run.distill.seed)?;
    let out = distill(&data, teacher.as_ref(), &run.distill)?;
    let names = data.feature_names();
    let doc = out.to_json(&run.distill, &names);
    let path = run.out.join("ranking.json");
    fs::write(&path, serde_json::to_string_pretty(&doc)?).map_err(|e| Error::io(&path, e))?;

    let mut table = format!("{:>4}  {:<40} {:>6} {:>12}\n", "rank", "interaction", "count", "mass");
    for (i, r) in out.ranking.interactions.iter().enumerate() {
        let label: Vec<String> = r.subset.iter().map(|j| names[j].clone()).collect();
        table.push_str(&format!("{:>4}  {:<40} {:>6} {:>12.4}\n", i + 1, label.join(" x "), r.count, r.mass));
    }
    let path = run.out.join("ranking.txt");
    fs::write(&path, &table).map_err(|e| Error::io(&path, e))?;
    print!("{table}");
    Ok(())
}

fn cmd_fit(a: &FitArgs) -> Result<()> {
    let mut run: FitRun = load_config(a.common.config.as_deref())?;
    apply_data(&mut run.data, &a.data);
    if let Some(r) = &a.ranking {
        run.ranking = Some(r.clone());
    }
    if let Some(s) = &a.interactions {
        run.interactions = Some(parse_interactions(s)?);
    }
    if a.n_int.is_some() {
        run.n_int = a.n_int;
    }
    if let Some(v) = a.test_fraction {
        run.test_fraction = v;
    }
    if let Some(s) = a.common.seed {
        run.seed = s;
        run.gam.seed = s;
    }
    if let Some(o) = &a.common.out {
        run.out = o.clone();
    }
    run.data.check()?;
    run.gam.validate()?;
    if !(run.test_fraction > 0.0 && run.test_fraction < 1.0) {
        return Err(Error::Config(format!("test fraction {} outside (0, 1)", run.test_fraction)));
    }
    let mut interactions = match (&run.ranking, &run.interactions) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "both a ranking file and an explicit interaction list were given; use one".into(),
            ))
        }
        (Some(path), None) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let doc: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            ranking_from_json(&doc)?
        }
        (None, Some(list)) => list.clone(),
        (None, None) => Vec::new(),
    };
    if let Some(n) = run.n_int {
        interactions.truncate(n);
    }

    let data = run.data.load()?;
    if let Some(bad) = interactions.iter().find(|s| s.span() > data.n_features()) {
        return Err(Error::Config(format!(
            "interaction {:?} refers to a feature beyond the {} columns",
            bad.indices(),
            data.n_features()
        )));
    }
    prepare_out(&run.out, &run)?;
    let (train, test) = split(&data, 1.0 - run.test_fraction, run.seed)?;
    let model = fit_gam(&train, &interactions, &run.gam)?;
    let pred = predict_gam(&model, &test.features)?;
    let scores = metrics(&pred, &test.target, data.task)?;

    let name = run
        .data
        .path
        .as_ref()
        .and_then(|p| p.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let records: Vec<MetricRecord> = scores
        .iter()
        .map(|(m, v)| MetricRecord {
            dataset: name.clone(),
            method: "gam".into(),
            metric: *m,
            n_int: interactions.len(),
            seed: run.seed,
            value: *v,
        })
        .collect();
    write_csv(&run.out.join("report.csv"), &records)?;
    let path = run.out.join("model.json");
    fs::write(&path, model.to_json()?).map_err(|e| Error::io(&path, e))?;
    let terms = run.out.join("terms");
    fs::create_dir_all(&terms).map_err(|e| Error::io(&terms, e))?;
    for (i, t) in model.terms.iter().enumerate() {
        let file = terms.join(format!("{i:02}_{}.csv", sanitize(&t.name(&model.feature_names))));
        fs::write(&file, model.term_table_csv(i)?).map_err(|e| Error::io(&file, e))?;
    }
    for (m, v) in &scores {
        println!("{:<8} {v:.6}", m.name());
    }
    Ok(())
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' }).collect()
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let mut run: BenchRun = load_config(a.common.config.as_deref())?;
    if !a.data.is_empty() {
        let target = a
            .target
            .clone()
            .ok_or_else(|| Error::Config("--data needs --target".into()))?;
        run.datasets = a
            .data
            .iter()
            .map(|p| BenchDataSpec {
                path: p.clone(),
                target: target.clone(),
                task: a.task,
            })
            .collect();
    }
    if let Some(m) = &a.methods {
        run.bench.methods = m.clone();
    }
    if let Some(n) = &a.n_ints {
        run.bench.n_ints = n.clone();
    }
    if let Some(n) = a.seeds {
        run.bench.seeds = seeds(n);
    }
    if let Some(t) = &a.teacher {
        run.bench.teacher = LearnerSpec::from_name(t)?;
    }
    if let Some(s) = a.common.seed {
        run.bench.distill.seed = s;
        run.bench.gam.seed = s;
    }
    if let Some(o) = &a.common.out {
        run.out = o.clone();
    }
    if run.datasets.is_empty() {
        return Err(Error::Config("no datasets given (--data)".into()));
    }
    run.bench.validate()?;

    let datasets: Vec<BenchDataset> = run
        .datasets
        .iter()
        .map(|s| {
            Ok(BenchDataset {
                name: s.path.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
                data: load_csv(&s.path, &s.target, s.task)?,
            })
        })
        .collect::<Result<_>>()?;
    if datasets.len() < 2 {
        log::warn!("a single dataset gives trivial ranks");
    }
    prepare_out(&run.out, &run)?;
    let cache = Cache::at(run.out.join("cache"))?;
    let report = run_benchmark(&datasets, &run.bench, &cache)?;
    write_benchmark(&run.out, &report)?;
    println!("{}", report.header());
    println!("cells cached: {}, computed: {}, failures: {}", cache.hits(), cache.misses(), report.failures.len());
    Ok(())
}

fn cmd_scenario_a(a: &ScenarioAArgs) -> Result<()> {
    let mut run: ScenarioARun = load_config(a.common.config.as_deref())?;
    if let Some(e) = a.experiment {
        run.experiments = vec![e];
    }
    if let Some(n) = a.seeds {
        run.scenario.seeds = seeds(n);
    }
    if let Some(s) = a.common.seed {
        run.scenario.distill.seed = s;
    }
    if let Some(o) = &a.common.out {
        run.out = o.clone();
    }
    if run.experiments.is_empty() || run.experiments.iter().any(|e| !(1..=3).contains(e)) {
        return Err(Error::Config(format!("experiments {:?} must be drawn from 1, 2, 3", run.experiments)));
    }
    run.scenario.distill.validate()?;
    run.scenario.gam.validate()?;

    prepare_out(&run.out, &run)?;
    let grids = scenario_a_grids();
    let cells: Vec<_> = run
        .experiments
        .iter()
        .flat_map(|&e| grids[e as usize - 1].clone())
        .collect();
    let cache = Cache::at(run.out.join("cache"))?;
    let rows = run_scenario_a(&cells, &run.scenario, &cache)?;
    write_scenario_a(&run.out, &rows)?;
    println!("{} rows; cells cached: {}, computed: {}", rows.len(), cache.hits(), cache.misses());
    Ok(())
}

fn cmd_scenario_b(a: &ScenarioBArgs) -> Result<()> {
    let mut run: ScenarioBRun = if a.fast && a.common.config.is_none() {
        ScenarioBRun {
            scenario: ScenarioBConfig::fast(),
            ..Default::default()
        }
    } else {
        load_config(a.common.config.as_deref())?
    };
    if a.fast {
        let fast = ScenarioBConfig::fast();
        run.scenario.n = fast.n;
        run.scenario.seeds = fast.seeds;
    }
    if let Some(d) = &a.depths {
        run.scenario.depths = d.clone();
    }
    if let Some(n) = a.seeds {
        run.scenario.seeds = seeds(n);
    }
    if let Some(n) = a.n {
        run.scenario.n = n;
    }
    if let Some(s) = a.common.seed {
        run.scenario.distill.seed = s;
    }
    if let Some(o) = &a.common.out {
        run.out = o.clone();
    }
    if run.scenario.depths.is_empty() || run.scenario.seeds.is_empty() {
        return Err(Error::Config("depths and seeds must be non-empty".into()));
    }
    run.scenario.distill.validate()?;
    run.scenario.gam.validate()?;

    prepare_out(&run.out, &run)?;
    let cache = Cache::at(run.out.join("cache"))?;
    let rows = run_scenario_b(&run.scenario, &cache)?;
    write_scenario_b(&run.out, &rows)?;
    println!("{} rows; cells cached: {}, computed: {}", rows.len(), cache.hits(), cache.misses());
    Ok(())
}

fn cmd_stability(a: &StabilityArgs) -> Result<()> {
    let mut run: StabilityRun = load_config(a.common.config.as_deref())?;
    apply_data(&mut run.data, &a.data);
    if let Some(s) = &a.sizes {
        run.stability.sample_sizes = s.clone();
    }
    if let Some(r) = a.reference {
        run.stability.reference_size = r;
    }
    if let Some(t) = &a.teacher {
        run.stability.teacher = LearnerSpec::from_name(t)?;
    }
    if let Some(s) = a.common.seed {
        run.stability.seed = s;
    }
    if let Some(o) = &a.common.out {
        run.out = o.clone();
    }
    run.data.check()?;
    run.stability.distill.validate()?;

    let data = run.data.load()?;
    prepare_out(&run.out, &run)?;
    let cache = Cache::at(run.out.join("cache"))?;
    let rows = run_stability(&data, &run.stability, &cache)?;
    write_stability(&run.out, &rows)?;
    for r in &rows {
        let cells: Vec<String> = r.entries.iter().map(|e| format!("{:.2}", e.overlap)).collect();
        println!("{:<6} {}", r.method, cells.join(" "));
    }
    Ok(())
}

fn cmd_serve(a: &ServeArgs) -> Result<()> {
    let learner = LearnerSpec::from_name(&a.learner)?;
    let fault = a.fault.map(|f| match f {
        FaultArg::ExitOnPredict => Fault::ExitOnPredict,
        FaultArg::FailFirstPredict => Fault::FailFirstPredict,
    });
    let Some(addr) = &a.listen else {
        let stdin = io::stdin();
        return serve(stdin.lock(), io::stdout().lock(), learner, fault);
    };
    let listener = TcpListener::bind(addr).map_err(|e| Error::Config(format!("cannot listen on {addr}: {e}")))?;
    let local = listener.local_addr().map_err(|e| Error::io(addr, e))?;
    // Announced on stdout so a parent process can find an ephemeral port.
    println!("listening on {local}");
    io::stdout().flush().map_err(|e| Error::io("<stdout>", e))?;
    let learner = Arc::new(learner);
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                log::warn!("accept failed: {e}");
                continue;
            }
        };
        let learner = Arc::clone(&learner);
        std::thread::spawn(move || {
            let reader = match stream.try_clone() {
                Ok(r) => BufReader::new(r),
                Err(e) => return log::warn!("connection setup failed: {e}"),
            };
            if let Err(e) = serve(reader, stream, (*learner).clone(), fault) {
                log::info!("session ended: {e}");
            }
        });
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Cmd::Distill(a) => cmd_distill(a),
        Cmd::Fit(a) => cmd_fit(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Scenario { which: ScenarioCmd::A(a) } => cmd_scenario_a(a),
        Cmd::Scenario { which: ScenarioCmd::B(a) } => cmd_scenario_b(a),
        Cmd::Stability(a) => cmd_stability(a),
        Cmd::Serve(a) => cmd_serve(a),
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.verbose);
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return 1;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already configured: {e}");
        }
    }
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.exit_code() == 1 {
                eprintln!("run `gam-distill help` for usage");
            }
            e.exit_code()
        }
    }
}
