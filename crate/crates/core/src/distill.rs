//! Per-sample masked-query explanation of a fitted teacher, and frequency
//! aggregation of the interactions found into a global ranking.

use std::collections::{BTreeMap, HashMap};

use rand::seq::{index::sample, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{baseline_vector, Dataset, Matrix};
use crate::error::{Error, Result};
use crate::fourier::{fit_surrogate, FeatureSet, FitDiagnostics, FourierSurrogate, Mask, SurrogateConfig, ValueFunction, MAX_SURROGATE_FEATURES};
use crate::indices::{index_from_surrogate, IndexKind, IndexScores, MAX_FSII_FEATURES, MAX_TABULATED_FEATURES};
use crate::learners::{Prediction, Predictor};

const LOG_ODDS_CLAMP: f64 = 1e-6;
/// Scores at or below this magnitude are treated as absent.
const SCORE_FLOOR: f64 = 1e-12;

/// Scalar read off a classification teacher for the sample's own label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    /// `log(p_y / (1 - p_y))` with `p_y` clamped to `[1e-6, 1 - 1e-6]`.
    #[default]
    LogOdds,
    Probability,
}

/// How masked-out features are filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Masking {
    /// Training mean (numeric) or mode (categorical) of each feature.
    Baseline,
    /// Average teacher output over a fixed random set of training rows
    /// supplying the masked-out values.
    Marginal { background: usize },
}

impl Default for Masking {
    fn default() -> Self {
        Masking::Marginal { background: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistillConfig {
    pub max_order: usize,
    pub budget: usize,
    /// Samples explained; `None` means `min(N, 100)`.
    pub n_explain: Option<usize>,
    pub per_sample_top: usize,
    /// Optional magnitude threshold applied before the per-sample top-r cut.
    pub min_score: Option<f64>,
    pub index: IndexKind,
    pub n_int: usize,
    pub value_kind: ValueKind,
    pub masking: Masking,
    pub max_support: usize,
    pub ridge: f64,
    pub seed: u64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            max_order: 3,
            budget: 500,
            n_explain: None,
            per_sample_top: 5,
            min_score: None,
            index: IndexKind::Fbii,
            n_int: 8,
            value_kind: ValueKind::LogOdds,
            masking: Masking::default(),
            max_support: 20,
            ridge: 1e-6,
            seed: 0,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_order < 2 {
            return Err(Error::Config(format!(
                "max_order {} must be at least 2 to find interactions",
                self.max_order
            )));
        }
        if self.per_sample_top == 0 {
            return Err(Error::Config("per_sample_top must be at least 1".into()));
        }
        if self.n_int == 0 {
            return Err(Error::Config("n_int must be at least 1".into()));
        }
        if self.budget < 50 {
            return Err(Error::Config(format!("budget {} is below the minimum of 50", self.budget)));
        }
        if self.n_explain == Some(0) {
            return Err(Error::Config("n_explain must be at least 1".into()));
        }
        if let Masking::Marginal { background: 0 } = self.masking {
            return Err(Error::Config("marginal masking needs at least one background row".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        hex_digest(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// SplitMix64 finalizer, used to derive independent child seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const SELECT_STREAM: u64 = u64::MAX;
const BACKGROUND_STREAM: u64 = u64::MAX - 1;

/// Source of values for masked-out features.
#[derive(Debug, Clone, PartialEq)]
pub enum Fill {
    Baseline(Vec<f64>),
    Background(Matrix),
}

impl Fill {
    pub fn from_train(train: &Dataset, masking: &Masking, seed: u64) -> Result<Self> {
        match masking {
            Masking::Baseline => Ok(Fill::Baseline(baseline_vector(train)?.0)),
            Masking::Marginal { background } => {
                let n = train.n_rows();
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, BACKGROUND_STREAM));
                let mut idx = sample(&mut rng, n, (*background).min(n)).into_vec();
                idx.sort_unstable();
                Ok(Fill::Background(train.features.select_rows(&idx)))
            }
        }
    }

    fn width(&self) -> usize {
        match self {
            Fill::Baseline(b) => b.len(),
            Fill::Background(m) => m.n_cols(),
        }
    }

    fn n_rows(&self) -> usize {
        match self {
            Fill::Baseline(_) => 1,
            Fill::Background(m) => m.n_rows(),
        }
    }

    fn row(&self, r: usize) -> &[f64] {
        match self {
            Fill::Baseline(b) => b,
            Fill::Background(m) => m.row(r),
        }
    }
}

/// The masked value function of one sample: mask bit 1 keeps `x_j`, bit 0
/// substitutes the fill value.
pub struct MaskedValue<'a> {
    teacher: &'a dyn Predictor,
    x: &'a [f64],
    label: Option<usize>,
    fill: &'a Fill,
    kind: ValueKind,
    /// Regression standardization (mean, std).
    scale: (f64, f64),
}

impl<'a> MaskedValue<'a> {
    /// `y` is the class code for classification teachers and ignored otherwise;
    /// `scale` is the training-target (mean, std) used for regression.
    pub fn new(
        teacher: &'a dyn Predictor,
        x: &'a [f64],
        y: f64,
        fill: &'a Fill,
        kind: ValueKind,
        scale: (f64, f64),
    ) -> Result<Self> {
        let p = teacher.n_features();
        if x.len() != p || fill.width() != p {
            return Err(Error::invalid(format!(
                "sample has {} features and fill {}, teacher expects {p}",
                x.len(),
                fill.width()
            )));
        }
        let label = if teacher.task().is_classification() {
            let k = teacher.n_classes();
            if !(y >= 0.0 && y.fract() == 0.0 && (y as usize) < k) {
                return Err(Error::invalid(format!("label {y} outside the {k} teacher classes")));
            }
            Some(y as usize)
        } else {
            None
        };
        Ok(Self {
            teacher,
            x,
            label,
            fill,
            kind,
            scale,
        })
    }
}

impl ValueFunction for MaskedValue<'_> {
    fn n_features(&self) -> usize {
        self.x.len()
    }

    fn evaluate(&self, masks: &[Mask]) -> Result<Vec<f64>> {
        let p = self.x.len();
        let reps = self.fill.n_rows();
        // Identical composite rows are common (binary features, repeated
        // background values), so each distinct row is sent to the teacher once.
        // Keyed by a row hash; equal hashes are confirmed against the stored row.
        let mut slot_of: HashMap<u64, Vec<usize>> = HashMap::new();
        let mut slots = Vec::with_capacity(masks.len() * reps);
        let mut data: Vec<f64> = Vec::new();
        let mut row = vec![0.0; p];
        let mut distinct = 0;
        for m in masks {
            for r in 0..reps {
                let fill = self.fill.row(r);
                let mut h: u64 = 0xcbf2_9ce4_8422_2325;
                for j in 0..p {
                    row[j] = if m.get(j) { self.x[j] } else { fill[j] };
                    h = (h ^ row[j].to_bits()).wrapping_mul(0x100_0000_01b3).rotate_left(29);
                }
                let bucket = slot_of.entry(h).or_default();
                let found = bucket
                    .iter()
                    .copied()
                    .find(|&s| data[s * p..(s + 1) * p].iter().zip(&row).all(|(a, b)| a.to_bits() == b.to_bits()));
                let slot = found.unwrap_or_else(|| {
                    data.extend_from_slice(&row);
                    bucket.push(distinct);
                    distinct += 1;
                    distinct - 1
                });
                slots.push(slot);
            }
        }
        let rows = Matrix::new(distinct, p, data)?;
        let unique: Vec<f64> = match (self.teacher.predict(&rows)?, self.label) {
            (Prediction::Regression(v), None) => v,
            (Prediction::Proba(pr), Some(y)) => pr.into_iter().map(|row| row[y]).collect(),
            _ => return Err(Error::Teacher("teacher output kind does not match its task".into())),
        };
        if unique.len() != distinct {
            return Err(Error::Teacher(format!(
                "teacher returned {} outputs for {distinct} rows",
                unique.len()
            )));
        }
        let raw: Vec<f64> = slots.iter().map(|&s| unique[s]).collect();
        Ok(raw
            .chunks(reps)
            .map(|c| {
                let v = c.iter().sum::<f64>() / reps as f64;
                match self.label {
                    None => (v - self.scale.0) / self.scale.1,
                    Some(_) => match self.kind {
                        ValueKind::Probability => v,
                        ValueKind::LogOdds => {
                            let q = v.clamp(LOG_ODDS_CLAMP, 1.0 - LOG_ODDS_CLAMP);
                            (q / (1.0 - q)).ln()
                        }
                    },
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDiagnostics {
    /// Training-row index of the explained sample.
    pub row: usize,
    pub surrogate: FitDiagnostics,
    pub support_size: usize,
    pub index: IndexKind,
    /// Set when the requested index could not be tabulated and FBII was used.
    pub fell_back: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleExplanation {
    /// Scores restricted to subsets of at least two features.
    pub scores: IndexScores,
    pub diagnostics: SampleDiagnostics,
}

/// Explains one sample: fits a surrogate of its masked value function and
/// scores interactions with the configured index.
pub fn explain_sample(
    teacher: &dyn Predictor,
    x: &[f64],
    y: f64,
    fill: &Fill,
    scale: (f64, f64),
    cfg: &DistillConfig,
    row: usize,
) -> Result<SampleExplanation> {
    let (s, order) = sample_surrogate(teacher, x, y, fill, scale, cfg, row)?;
    score_sample(&s, cfg.index, order, row)
}

/// Surrogate of one sample's masked value function, with the order it was fitted at.
pub fn sample_surrogate(
    teacher: &dyn Predictor,
    x: &[f64],
    y: f64,
    fill: &Fill,
    scale: (f64, f64),
    cfg: &DistillConfig,
    row: usize,
) -> Result<(FourierSurrogate, usize)> {
    let p = x.len();
    if p > MAX_SURROGATE_FEATURES {
        return Err(Error::invalid(format!(
            "{p} features exceed the explanation limit of {MAX_SURROGATE_FEATURES}"
        )));
    }
    let vf = MaskedValue::new(teacher, x, y, fill, cfg.value_kind, scale)?;
    let scfg = SurrogateConfig {
        max_order: cfg.max_order.min(p.max(1)),
        budget: cfg.budget,
        max_support: cfg.max_support,
        ridge: cfg.ridge,
        seed: derive_seed(cfg.seed, row as u64),
        ..SurrogateConfig::default()
    };
    Ok((fit_surrogate(&vf, &scfg)?, scfg.max_order))
}

/// Interaction scores of a fitted sample surrogate under one index.
pub fn score_sample(s: &FourierSurrogate, index: IndexKind, order: usize, row: usize) -> Result<SampleExplanation> {
    let active = s.active_features().len();
    let limit = match index {
        IndexKind::Fsii => MAX_FSII_FEATURES,
        k if k.needs_table() => MAX_TABULATED_FEATURES,
        _ => usize::MAX,
    };
    let (kind, fell_back) = if active > limit {
        log::debug!("row {row}: active set {active} too large for {index}, using FBII");
        (IndexKind::Fbii, true)
    } else {
        (index, false)
    };
    let mut scores = index_from_surrogate(kind, s, order)?;
    scores.retain_min_size(2);
    Ok(SampleExplanation {
        scores,
        diagnostics: SampleDiagnostics {
            row,
            surrogate: s.diagnostics.clone(),
            support_size: s.terms().len(),
            index: kind,
            fell_back,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedInteraction {
    pub subset: FeatureSet,
    pub count: usize,
    /// Sum of `|score|` over the samples that selected this subset.
    pub mass: f64,
}

/// Frequency-ordered interactions: count descending, then mass descending,
/// then lexicographic subset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InteractionRanking {
    pub interactions: Vec<RankedInteraction>,
    pub config_digest: String,
    pub teacher_digest: String,
}

impl InteractionRanking {
    pub fn subsets(&self) -> Vec<FeatureSet> {
        self.interactions.iter().map(|r| r.subset).collect()
    }

    pub fn top(&self, n: usize) -> Vec<FeatureSet> {
        self.interactions.iter().take(n).map(|r| r.subset).collect()
    }

    pub fn truncate(&mut self, n: usize) {
        self.interactions.truncate(n);
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }
}

/// The subsets one sample contributes: its `r` largest by `|score|`, after the
/// optional magnitude threshold. Subsets must have at least two features.
pub fn sample_selection(scores: &IndexScores, r: usize, min_score: Option<f64>) -> Vec<(FeatureSet, f64)> {
    let floor = min_score.unwrap_or(0.0).max(SCORE_FLOOR);
    scores
        .ranked()
        .into_iter()
        .filter(|(s, v)| s.len() >= 2 && v.abs() > floor)
        .take(r)
        .collect()
}

/// Counts how often each subset appears among per-sample top-`r` selections.
pub fn aggregate(per_sample: &[IndexScores], r: usize) -> InteractionRanking {
    aggregate_with(per_sample, r, None)
}

pub fn aggregate_with(per_sample: &[IndexScores], r: usize, min_score: Option<f64>) -> InteractionRanking {
    let mut tally: BTreeMap<FeatureSet, (usize, f64)> = BTreeMap::new();
    for scores in per_sample {
        for (s, v) in sample_selection(scores, r.max(1), min_score) {
            let e = tally.entry(s).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += v.abs();
        }
    }
    let mut interactions: Vec<RankedInteraction> = tally
        .into_iter()
        .map(|(subset, (count, mass))| RankedInteraction { subset, count, mass })
        .collect();
    interactions.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then(b.mass.total_cmp(&a.mass))
            .then(a.subset.cmp(&b.subset))
    });
    InteractionRanking {
        interactions,
        ..Default::default()
    }
}

/// Result of a distillation run.
#[derive(Debug, Clone, PartialEq)]
pub struct DistillOutput {
    /// Ranking truncated to `n_int`.
    pub ranking: InteractionRanking,
    /// Untruncated ranking.
    pub full: InteractionRanking,
    pub samples: Vec<SampleDiagnostics>,
    /// Per-sample scores, in explanation order.
    pub scores: Vec<IndexScores>,
}

impl DistillOutput {
    pub fn total_queries(&self) -> usize {
        self.samples.iter().map(|s| s.surrogate.queries).sum()
    }

    pub fn mean_holdout_r2(&self) -> Option<f64> {
        let v: Vec<f64> = self.samples.iter().filter_map(|s| s.surrogate.holdout_r2).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Ranking document: `{config, interactions: [{features, indices, count, mass}], diagnostics}`.
    pub fn to_json(&self, cfg: &DistillConfig, feature_names: &[String]) -> serde_json::Value {
        let interactions: Vec<serde_json::Value> = self
            .ranking
            .interactions
            .iter()
            .map(|r| {
                serde_json::json!({
                    "features": r.subset.iter().map(|j| feature_names.get(j).cloned().unwrap_or_else(|| format!("x{j}"))).collect::<Vec<_>>(),
                    "indices": r.subset.indices(),
                    "count": r.count,
                    "mass": r.mass,
                })
            })
            .collect();
        serde_json::json!({
            "config": cfg,
            "interactions": interactions,
            "diagnostics": {
                "config_digest": self.ranking.config_digest,
                "teacher_digest": self.ranking.teacher_digest,
                "n_explained": self.samples.len(),
                "total_queries": self.total_queries(),
                "mean_holdout_r2": self.mean_holdout_r2(),
                "fallbacks": self.samples.iter().filter(|s| s.fell_back).count(),
                "samples": self.samples,
            }
        })
    }
}

/// Parses the `interactions` list of a ranking document.
pub fn ranking_from_json(v: &serde_json::Value) -> Result<Vec<FeatureSet>> {
    let list = v
        .get("interactions")
        .and_then(|i| i.as_array())
        .ok_or_else(|| Error::Config("ranking file lacks an `interactions` array".into()))?;
    list.iter()
        .map(|e| {
            let idx: Vec<usize> = serde_json::from_value(e.get("indices").cloned().unwrap_or_default())
                .map_err(|err| Error::Config(format!("bad interaction entry: {err}")))?;
            FeatureSet::from_indices(idx)
        })
        .collect()
}

/// Rows explained for a training set: the first `n_explain` of a seeded shuffle.
pub fn explained_rows(n: usize, cfg: &DistillConfig) -> Vec<usize> {
    let m = cfg.n_explain.unwrap_or(100).min(n);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, SELECT_STREAM)));
    idx.truncate(m);
    idx
}

/// Behavioural fingerprint of a teacher: digest of its outputs on a few training rows.
pub fn teacher_digest(teacher: &dyn Predictor, train: &Dataset) -> Result<String> {
    let idx: Vec<usize> = (0..train.n_rows().min(32)).collect();
    let out = teacher.predict(&train.features.select_rows(&idx))?;
    let bytes: Vec<u8> = match out {
        Prediction::Regression(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
        Prediction::Proba(p) => p.iter().flatten().flat_map(|x| x.to_le_bytes()).collect(),
    };
    Ok(hex_digest(&bytes))
}

/// Runs the full explanation-and-counting pipeline over a training set.
pub fn distill(train: &Dataset, teacher: &dyn Predictor, cfg: &DistillConfig) -> Result<DistillOutput> {
    Ok(distill_indices(train, teacher, cfg, &[cfg.index])?.remove(0))
}

/// Like [`distill`] for several indices at once. Each sample's surrogate is
/// fitted once and shared, so every output equals a separate run with
/// `cfg.index` set to that index.
pub fn distill_indices(
    train: &Dataset,
    teacher: &dyn Predictor,
    cfg: &DistillConfig,
    indices: &[IndexKind],
) -> Result<Vec<DistillOutput>> {
    cfg.validate()?;
    if teacher.n_features() != train.n_features() {
        return Err(Error::invalid(format!(
            "teacher expects {} features, training data has {}",
            teacher.n_features(),
            train.n_features()
        )));
    }
    let fill = Fill::from_train(train, &cfg.masking, cfg.seed)?;
    let scale = train.target_moments();
    let rows = explained_rows(train.n_rows(), cfg);
    let per_row: Vec<Vec<SampleExplanation>> = rows
        .par_iter()
        .map(|&i| {
            let (s, order) = sample_surrogate(teacher, train.features.row(i), train.target[i], &fill, scale, cfg, i)?;
            indices.iter().map(|&k| score_sample(&s, k, order, i)).collect()
        })
        .collect::<Result<_>>()?;
    let digest = teacher_digest(teacher, train)?;
    Ok(indices
        .iter()
        .enumerate()
        .map(|(n, &kind)| {
            let explained: Vec<&SampleExplanation> = per_row.iter().map(|e| &e[n]).collect();
            let scores: Vec<IndexScores> = explained.iter().map(|e| e.scores.clone()).collect();
            let mut full = aggregate_with(&scores, cfg.per_sample_top, cfg.min_score);
            full.config_digest = DistillConfig { index: kind, ..cfg.clone() }.digest();
            full.teacher_digest = digest.clone();
            let mut ranking = full.clone();
            ranking.truncate(cfg.n_int);
            DistillOutput {
                ranking,
                full,
                samples: explained.iter().map(|e| e.diagnostics.clone()).collect(),
                scores,
            }
        })
        .collect())
}
