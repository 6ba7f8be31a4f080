//! Cyclic-boosting generalized additive models with binned shape functions
//! and explicit low-order interaction tables.

mod fast;
mod update;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{build_bins, Dataset, FeatureBins, Matrix, Task};
use crate::error::{Error, Result};
use crate::fourier::FeatureSet;
use crate::learners::{check_width, Prediction, Predictor};

pub use fast::{fast_select_pairs, PairScore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GamTrainConfig {
    /// Bins for univariate terms.
    pub max_bins: usize,
    /// Bins per dimension of pairwise terms.
    pub pair_bins: usize,
    /// Bins per dimension of order-3 terms.
    pub triple_bins: usize,
    pub outer_bags: usize,
    pub learning_rate: f64,
    pub max_rounds: usize,
    /// Rounds without validation improvement before stopping.
    pub patience: usize,
    pub validation_fraction: f64,
    /// Leaves of each univariate update.
    pub max_leaves: usize,
    /// Minimum bootstrap weight in any update leaf.
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for GamTrainConfig {
    fn default() -> Self {
        Self {
            max_bins: 256,
            pair_bins: 32,
            triple_bins: 8,
            outer_bags: 4,
            learning_rate: 0.05,
            max_rounds: 3000,
            patience: 50,
            validation_fraction: 0.15,
            max_leaves: 3,
            min_samples_leaf: 2,
            seed: 0,
        }
    }
}

impl GamTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_bins < 2 || self.pair_bins < 2 || self.triple_bins < 2 {
            return Err(Error::invalid("bin counts must be at least 2"));
        }
        if self.max_leaves < 2 {
            return Err(Error::invalid("max_leaves must be at least 2"));
        }
        if self.outer_bags == 0 || self.max_rounds == 0 || self.patience == 0 {
            return Err(Error::invalid("outer_bags, max_rounds and patience must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid(format!("learning rate {} outside (0, 1]", self.learning_rate)));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "validation fraction {} outside (0, 1)",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    Identity,
    Logit,
    Softmax,
}

/// One additive component: a piecewise-constant table over the bin grid of
/// its features. Multiclass tables hold one value per class in each cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub features: Vec<usize>,
    pub bins: Vec<FeatureBins>,
    /// Row-major over the bin grid (first feature slowest), `n_outputs` values per cell.
    pub values: Vec<f64>,
}

impl Term {
    fn new(features: Vec<usize>, bins: Vec<FeatureBins>, n_outputs: usize) -> Self {
        let cells: usize = bins.iter().map(FeatureBins::n_bins).product();
        Self {
            features,
            bins,
            values: vec![0.0; cells * n_outputs],
        }
    }

    pub fn subset(&self) -> FeatureSet {
        FeatureSet::of(&self.features)
    }

    pub fn n_cells(&self) -> usize {
        self.bins.iter().map(FeatureBins::n_bins).product()
    }

    /// Grid cell of a row. Values beyond the outer cuts land in the edge bins.
    pub fn cell(&self, row: &[f64]) -> usize {
        let mut c = 0;
        for (b, &j) in self.bins.iter().zip(&self.features) {
            c = c * b.n_bins() + b.bin(row[j]);
        }
        c
    }

    pub fn name(&self, names: &[String]) -> String {
        self.features
            .iter()
            .map(|&j| names.get(j).cloned().unwrap_or_else(|| format!("x{j}")))
            .collect::<Vec<_>>()
            .join(" x ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub n_rows: usize,
    pub bags: usize,
    /// Rounds kept (best validation round) per bag.
    pub best_rounds: Vec<usize>,
    pub best_validation_loss: Vec<f64>,
    /// Training loss after every round, per bag.
    pub train_loss: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamModel {
    pub task: Task,
    pub link: Link,
    pub n_features: usize,
    /// One entry per output (per class for multiclass).
    pub intercept: Vec<f64>,
    pub terms: Vec<Term>,
    pub feature_names: Vec<String>,
    pub config: GamTrainConfig,
    pub log: TrainingLog,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn softmax_into(scores: &[f64], out: &mut [f64]) {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (o, s) in out.iter_mut().zip(scores) {
        *o = (s - m).exp();
        z += *o;
    }
    out.iter_mut().for_each(|o| *o /= z);
}

fn n_outputs(task: Task, n_classes: usize) -> usize {
    match task {
        Task::Multiclass => n_classes,
        _ => 1,
    }
}

/// Checks and normalizes requested interaction subsets.
fn interaction_features(interactions: &[FeatureSet], p: usize) -> Result<Vec<Vec<usize>>> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(interactions.len());
    for &s in interactions {
        if !(2..=3).contains(&s.len()) {
            return Err(Error::invalid(format!("interaction {s} must have 2 or 3 features")));
        }
        if s.iter().any(|j| j >= p) {
            return Err(Error::invalid(format!("interaction {s} refers to a feature beyond {}", p - 1)));
        }
        if !seen.insert(s) {
            return Err(Error::invalid(format!("interaction {s} listed twice")));
        }
        out.push(s.indices());
    }
    Ok(out)
}

/// Loss of one row given its raw scores.
fn row_loss(task: Task, scores: &[f64], y: f64, buf: &mut [f64]) -> f64 {
    match task {
        Task::Regression => (scores[0] - y).powi(2),
        Task::Binary => {
            // log(1 + e^s) - y s, stable for large |s|.
            let s = scores[0];
            s.max(0.0) + (-s.abs()).exp().ln_1p() - y * s
        }
        Task::Multiclass => {
            softmax_into(scores, buf);
            -buf[y as usize].max(1e-300).ln()
        }
    }
}

struct BagResult {
    tables: Vec<Vec<f64>>,
    best_round: usize,
    best_val: f64,
    train_loss: Vec<f64>,
}

/// Everything a bag needs that is shared across bags.
struct Problem<'a> {
    task: Task,
    k: usize,
    y: &'a [f64],
    intercept: &'a [f64],
    /// `cells[t][i]`: grid cell of row `i` in term `t`.
    cells: Vec<Vec<u32>>,
    sizes: Vec<usize>,
    /// Bins per dimension of each term's grid.
    dims: Vec<Vec<usize>>,
}

impl Problem<'_> {
    fn loss(&self, rows: &[usize], weights: Option<&[f64]>, scores: &[f64]) -> f64 {
        let mut buf = vec![0.0; self.k];
        let (mut sum, mut wsum) = (0.0, 0.0);
        for (r, &i) in rows.iter().enumerate() {
            let w = weights.map_or(1.0, |w| w[r]);
            if w == 0.0 {
                continue;
            }
            sum += w * row_loss(self.task, &scores[i * self.k..(i + 1) * self.k], self.y[i], &mut buf);
            wsum += w;
        }
        sum / wsum.max(1e-300)
    }

    fn fit_bag(&self, cfg: &GamTrainConfig, bag: usize) -> BagResult {
        let n = self.y.len();
        let k = self.k;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(bag as u64 + 1);

        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let n_val = ((n as f64 * cfg.validation_fraction).round() as usize).clamp(1, n - 1);
        let val: Vec<usize> = order[..n_val].to_vec();
        let mut fit_rows: Vec<usize> = order[n_val..].to_vec();
        fit_rows.sort_unstable();
        // Bootstrap as integer multiplicities over the fitting rows.
        let mut weights = vec![0.0; fit_rows.len()];
        for _ in 0..fit_rows.len() {
            weights[rng.random_range(0..fit_rows.len())] += 1.0;
        }

        let mut scores = vec![0.0; n * k];
        for i in 0..n {
            scores[i * k..(i + 1) * k].copy_from_slice(self.intercept);
        }
        let mut tables: Vec<Vec<f64>> = self.sizes.iter().map(|&c| vec![0.0; c * k]).collect();
        let mut best = tables.clone();
        let mut best_val = self.loss(&val, None, &scores);
        let mut best_round = 0;
        let mut train_loss = Vec::new();
        let mut grad = vec![0.0; n * k];
        let mut hess = vec![0.0; n * k];
        let mut probs = vec![0.0; k];
        let mut stats: Vec<update::CellStats> = self.sizes.iter().map(|&c| update::CellStats::new(c, k)).collect();

        for round in 1..=cfg.max_rounds {
            for (t, table) in tables.iter_mut().enumerate() {
                let cells = &self.cells[t];
                for (r, &i) in fit_rows.iter().enumerate() {
                    if weights[r] == 0.0 {
                        continue;
                    }
                    let s = &scores[i * k..(i + 1) * k];
                    match self.task {
                        Task::Regression => {
                            grad[i] = s[0] - self.y[i];
                            hess[i] = 1.0;
                        }
                        Task::Binary => {
                            let q = sigmoid(s[0]);
                            grad[i] = q - self.y[i];
                            hess[i] = q * (1.0 - q);
                        }
                        Task::Multiclass => {
                            softmax_into(s, &mut probs);
                            let y = self.y[i] as usize;
                            for c in 0..k {
                                grad[i * k + c] = probs[c] - (c == y) as u8 as f64;
                                hess[i * k + c] = probs[c] * (1.0 - probs[c]);
                            }
                        }
                    }
                }
                let stats = &mut stats[t];
                stats.clear();
                for (r, &i) in fit_rows.iter().enumerate() {
                    let w = weights[r];
                    if w == 0.0 {
                        continue;
                    }
                    let c = cells[i] as usize;
                    for o in 0..k {
                        stats.g[c * k + o] += w * grad[i * k + o];
                        stats.h[c * k + o] += w * hess[i * k + o];
                    }
                    stats.n[c] += w;
                }
                let leaves = update::partition(&self.dims[t], stats, cfg.min_samples_leaf as f64, cfg.max_leaves);
                let leaf_of = update::leaf_of_cells(&self.dims[t], &leaves);
                let mut lg = vec![0.0; leaves.len() * k];
                let mut lh = vec![0.0; leaves.len() * k];
                for (c, &l) in leaf_of.iter().enumerate() {
                    for o in 0..k {
                        lg[l as usize * k + o] += stats.g[c * k + o];
                        lh[l as usize * k + o] += stats.h[c * k + o];
                    }
                }
                let leaf_step: Vec<f64> = lg
                    .iter()
                    .zip(&lh)
                    .map(|(g, h)| if *h > 1e-12 { -cfg.learning_rate * g / h } else { 0.0 })
                    .collect();
                let mut step = vec![0.0; self.sizes[t] * k];
                for (c, &l) in leaf_of.iter().enumerate() {
                    for o in 0..k {
                        step[c * k + o] = leaf_step[l as usize * k + o];
                    }
                }
                for (v, d) in table.iter_mut().zip(&step) {
                    *v += d;
                }
                for i in 0..n {
                    let c = cells[i] as usize;
                    for o in 0..k {
                        scores[i * k + o] += step[c * k + o];
                    }
                }
            }
            train_loss.push(self.loss(&fit_rows, Some(&weights), &scores));
            let v = self.loss(&val, None, &scores);
            if v < best_val - 1e-12 * best_val.abs().max(1.0) {
                best_val = v;
                best_round = round;
                best.clone_from(&tables);
            } else if round - best_round >= cfg.patience {
                break;
            }
        }
        BagResult {
            tables: best,
            best_round,
            best_val,
            train_loss,
        }
    }
}

/// Fits a GAM with one shape function per feature plus the given interaction terms.
pub fn fit_gam(train: &Dataset, interactions: &[FeatureSet], cfg: &GamTrainConfig) -> Result<GamModel> {
    cfg.validate()?;
    let n = train.n_rows();
    if n < 2 {
        return Err(Error::data(format!("cannot fit a GAM on {n} row(s)")));
    }
    let p = train.n_features();
    let pairs = interaction_features(interactions, p)?;
    let task = train.task;
    let k = n_outputs(task, train.n_classes());

    let uni = build_bins(train, cfg.max_bins)?;
    let coarse = |j: usize, bins: usize| FeatureBins::from_values(train.features.column(j), bins);
    let mut terms: Vec<Term> = (0..p).map(|j| Term::new(vec![j], vec![uni.features[j].clone()], k)).collect();
    for f in pairs {
        let bins_per_dim = if f.len() == 2 { cfg.pair_bins } else { cfg.triple_bins };
        let bins = f.iter().map(|&j| coarse(j, bins_per_dim)).collect();
        terms.push(Term::new(f, bins, k));
    }

    let intercept: Vec<f64> = match task {
        Task::Regression => vec![train.target_moments().0],
        Task::Binary => {
            let q = (train.target.iter().sum::<f64>() / n as f64).clamp(1e-6, 1.0 - 1e-6);
            vec![(q / (1.0 - q)).ln()]
        }
        Task::Multiclass => {
            let all: Vec<usize> = (0..n).collect();
            crate::learners::class_distribution(train, &all)
                .into_iter()
                .map(|q| q.max(1e-6).ln())
                .collect()
        }
    };

    let cells: Vec<Vec<u32>> = terms
        .iter()
        .map(|t| train.features.rows().map(|r| t.cell(r) as u32).collect())
        .collect();
    let problem = Problem {
        task,
        k,
        y: &train.target,
        intercept: &intercept,
        sizes: terms.iter().map(Term::n_cells).collect(),
        dims: terms.iter().map(|t| t.bins.iter().map(|b| b.n_bins()).collect()).collect(),
        cells,
    };
    let bags: Vec<BagResult> = (0..cfg.outer_bags).into_par_iter().map(|b| problem.fit_bag(cfg, b)).collect();

    // Average bag tables, then center each term over the training rows.
    let mut intercept = intercept.clone();
    for (t, term) in terms.iter_mut().enumerate() {
        for bag in &bags {
            for (v, b) in term.values.iter_mut().zip(&bag.tables[t]) {
                *v += b / bags.len() as f64;
            }
        }
        let mut mean = vec![0.0; k];
        for &c in &problem.cells[t] {
            for o in 0..k {
                mean[o] += term.values[c as usize * k + o];
            }
        }
        for o in 0..k {
            mean[o] /= n as f64;
            intercept[o] += mean[o];
        }
        for (idx, v) in term.values.iter_mut().enumerate() {
            *v -= mean[idx % k];
        }
    }
    if terms.iter().any(|t| t.values.iter().any(|v| !v.is_finite())) {
        return Err(Error::Numerical("GAM training produced non-finite table values".into()));
    }

    Ok(GamModel {
        task,
        link: match task {
            Task::Regression => Link::Identity,
            Task::Binary => Link::Logit,
            Task::Multiclass => Link::Softmax,
        },
        n_features: p,
        intercept,
        terms,
        feature_names: train.feature_names(),
        config: cfg.clone(),
        log: TrainingLog {
            n_rows: n,
            bags: bags.len(),
            best_rounds: bags.iter().map(|b| b.best_round).collect(),
            best_validation_loss: bags.iter().map(|b| b.best_val).collect(),
            train_loss: bags.into_iter().map(|b| b.train_loss).collect(),
        },
    })
}

impl GamModel {
    pub fn n_outputs(&self) -> usize {
        self.intercept.len()
    }

    /// Interaction subsets (terms beyond the univariate ones).
    pub fn interactions(&self) -> Vec<FeatureSet> {
        self.terms.iter().filter(|t| t.features.len() > 1).map(Term::subset).collect()
    }

    pub fn term(&self, subset: FeatureSet) -> Result<&Term> {
        self.terms
            .iter()
            .find(|t| t.subset() == subset)
            .ok_or_else(|| Error::invalid(format!("{subset} is not a term of this model")))
    }

    /// Pre-link scores of one row, one per output.
    pub fn raw_scores(&self, row: &[f64]) -> Vec<f64> {
        let k = self.n_outputs();
        let mut s = self.intercept.clone();
        for t in &self.terms {
            let c = t.cell(row);
            for o in 0..k {
                s[o] += t.values[c * k + o];
            }
        }
        s
    }

    /// Table value of `subset` at `row` for output `class` (0 unless multiclass).
    pub fn term_contribution_for(&self, subset: FeatureSet, row: &[f64], class: usize) -> Result<f64> {
        let t = self.term(subset)?;
        let k = self.n_outputs();
        if class >= k {
            return Err(Error::invalid(format!("output {class} out of range for {k} output(s)")));
        }
        if row.len() != self.n_features {
            return Err(Error::invalid(format!(
                "row has {} features, model expects {}",
                row.len(),
                self.n_features
            )));
        }
        Ok(t.values[t.cell(row) * k + class])
    }

    pub fn term_contribution(&self, subset: FeatureSet, row: &[f64]) -> Result<f64> {
        self.term_contribution_for(subset, row, 0)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Long-format table of one term: bin bounds per feature, then the value(s).
    pub fn term_table_csv(&self, term: usize) -> Result<String> {
        let t = self
            .terms
            .get(term)
            .ok_or_else(|| Error::invalid(format!("term {term} out of range")))?;
        let k = self.n_outputs();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = Vec::new();
        for &j in &t.features {
            let name = self.feature_names.get(j).cloned().unwrap_or_else(|| format!("x{j}"));
            header.push(format!("{name}_lo"));
            header.push(format!("{name}_hi"));
        }
        if k == 1 {
            header.push("value".into());
        } else {
            header.extend((0..k).map(|c| format!("value_{c}")));
        }
        w.write_record(&header)?;
        let dims: Vec<usize> = t.bins.iter().map(FeatureBins::n_bins).collect();
        for cell in 0..t.n_cells() {
            let mut rest = cell;
            let mut idx = vec![0; dims.len()];
            for d in (0..dims.len()).rev() {
                idx[d] = rest % dims[d];
                rest /= dims[d];
            }
            let mut rec = Vec::new();
            for (d, b) in t.bins.iter().enumerate() {
                let lo = if idx[d] == 0 { f64::NEG_INFINITY } else { b.cuts[idx[d] - 1] };
                let hi = b.cuts.get(idx[d]).copied().unwrap_or(f64::INFINITY);
                rec.push(lo.to_string());
                rec.push(hi.to_string());
            }
            rec.extend(t.values[cell * k..(cell + 1) * k].iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::io("<csv buffer>", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

pub fn predict_gam(m: &GamModel, rows: &Matrix) -> Result<Prediction> {
    m.predict(rows)
}

impl Predictor for GamModel {
    fn task(&self) -> Task {
        self.task
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        match self.task {
            Task::Regression => 0,
            Task::Binary => 2,
            Task::Multiclass => self.n_outputs(),
        }
    }

    fn predict(&self, rows: &Matrix) -> Result<Prediction> {
        check_width(rows, self.n_features)?;
        Ok(match self.link {
            Link::Identity => Prediction::Regression(rows.rows().map(|r| self.raw_scores(r)[0]).collect()),
            Link::Logit => Prediction::Proba(
                rows.rows()
                    .map(|r| {
                        let q = sigmoid(self.raw_scores(r)[0]);
                        vec![1.0 - q, q]
                    })
                    .collect(),
            ),
            Link::Softmax => Prediction::Proba(
                rows.rows()
                    .map(|r| {
                        let s = self.raw_scores(r);
                        let mut out = vec![0.0; s.len()];
                        softmax_into(&s, &mut out);
                        out
                    })
                    .collect(),
            ),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor_data(n: usize, seed: u64, task: Task) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..4).map(|_| rng.random_range(0..2) as f64).collect()).collect();
        let y = rows.iter().map(|r| (r[0] != r[1]) as u8 as f64).collect();
        Dataset::from_parts(Matrix::from_rows(&rows).unwrap(), y, task).unwrap()
    }

    fn quick() -> GamTrainConfig {
        GamTrainConfig {
            outer_bags: 2,
            ..Default::default()
        }
    }

    #[test]
    fn constant_target() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, (i % 7) as f64]).collect();
        let d = Dataset::from_parts(Matrix::from_rows(&rows).unwrap(), vec![2.5; 50], Task::Regression).unwrap();
        let m = fit_gam(&d, &[], &quick()).unwrap();
        assert!((m.intercept[0] - 2.5).abs() < 1e-12);
        assert!(m.terms.iter().flat_map(|t| &t.values).all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn xor_needs_the_pair() {
        let train = xor_data(1400, 1, Task::Binary);
        let test = xor_data(600, 2, Task::Binary);
        let acc = |m: &GamModel| {
            let p = m.predict(&test.features).unwrap().point();
            p.iter().zip(&test.target).filter(|(a, b)| a == b).count() as f64 / p.len() as f64
        };
        let additive = fit_gam(&train, &[], &quick()).unwrap();
        let paired = fit_gam(&train, &[FeatureSet::of(&[0, 1])], &quick()).unwrap();
        assert!(acc(&additive) <= 0.6);
        assert!(acc(&paired) >= 0.99);
        let t = FeatureSet::of(&[0, 1]);
        let v = |a: f64, b: f64| paired.term_contribution(t, &[a, b, 0.0, 0.0]).unwrap();
        assert!(v(0.0, 0.0) < 0.0 && v(1.0, 1.0) < 0.0 && v(0.0, 1.0) > 0.0 && v(1.0, 0.0) > 0.0);
    }

    #[test]
    fn decomposition_and_centering() {
        let d = xor_data(500, 3, Task::Regression);
        let m = fit_gam(&d, &[FeatureSet::of(&[0, 1]), FeatureSet::of(&[1, 2, 3])], &quick()).unwrap();
        let pred = m.predict(&d.features).unwrap().point();
        for (i, r) in d.features.rows().enumerate() {
            let sum: f64 = m.intercept[0] + m.terms.iter().map(|t| m.term_contribution(t.subset(), r).unwrap()).sum::<f64>();
            assert!((sum - pred[i]).abs() < 1e-12);
        }
        for t in &m.terms {
            let mean: f64 = d.features.rows().map(|r| m.term_contribution(t.subset(), r).unwrap()).sum::<f64>() / 500.0;
            assert!(mean.abs() < 1e-9, "{mean}");
        }
        assert!(m.term_contribution(FeatureSet::of(&[0, 2]), d.features.row(0)).is_err());
    }

    #[test]
    fn squared_loss_never_increases() {
        let d = xor_data(400, 4, Task::Regression);
        let m = fit_gam(&d, &[FeatureSet::of(&[0, 1])], &quick()).unwrap();
        for log in &m.log.train_loss {
            assert!(log.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }

    #[test]
    fn rejects_bad_interactions() {
        let d = xor_data(40, 5, Task::Regression);
        assert!(fit_gam(&d, &[FeatureSet::of(&[0])], &quick()).is_err());
        assert!(fit_gam(&d, &[FeatureSet::of(&[0, 9])], &quick()).is_err());
        assert!(fit_gam(&d, &[FeatureSet::of(&[0, 1, 2, 3])], &quick()).is_err());
        assert!(fit_gam(&d, &[FeatureSet::of(&[0, 1]), FeatureSet::of(&[0, 1])], &quick()).is_err());
        assert!(fit_gam(&d.subset(&[0]), &[], &quick()).is_err());
    }

    #[test]
    fn multiclass_probabilities() {
        let rows: Vec<Vec<f64>> = (0..300).map(|i| vec![(i % 3) as f64, (i % 5) as f64]).collect();
        let y = (0..300).map(|i| (i % 3) as f64).collect();
        let d = Dataset::from_parts(Matrix::from_rows(&rows).unwrap(), y, Task::Multiclass).unwrap();
        let m = fit_gam(&d, &[FeatureSet::of(&[0, 1])], &quick()).unwrap();
        let Prediction::Proba(p) = m.predict(&d.features).unwrap() else { panic!() };
        assert!(p.iter().all(|r| (r.iter().sum::<f64>() - 1.0).abs() < 1e-9));
        let acc = p.iter().zip(&d.target).filter(|(r, &y)| crate::learners::argmax(r) == y as usize).count();
        assert_eq!(acc, 300);
    }

    #[test]
    fn json_round_trip_and_tables() {
        let d = xor_data(200, 6, Task::Regression);
        let m = fit_gam(&d, &[FeatureSet::of(&[0, 1])], &quick()).unwrap();
        let back = GamModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back.predict(&d.features).unwrap(), m.predict(&d.features).unwrap());
        let csv = m.term_table_csv(4).unwrap();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("x0_lo,x0_hi,x1_lo,x1_hi,value"));
    }

    #[test]
    fn out_of_range_clamps_to_edges() {
        let d = xor_data(200, 7, Task::Regression);
        let m = fit_gam(&d, &[], &quick()).unwrap();
        let a = m.raw_scores(&[-5.0, 9.0, 0.0, 1.0]);
        let b = m.raw_scores(&[0.0, 1.0, 0.0, 1.0]);
        assert_eq!(a, b);
    }
}
