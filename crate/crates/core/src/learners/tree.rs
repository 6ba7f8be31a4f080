use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_width, class_distribution, Prediction, Predictor};
use crate::data::{Dataset, Matrix, Task};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CartConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Fraction of features considered at each split (1.0 = all).
    pub feature_fraction: f64,
    pub seed: u64,
}

impl Default for CartConfig {
    fn default() -> Self {
        Self {
            max_depth: 5,
            min_leaf: 1,
            feature_fraction: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Regression mean (one entry) or class distribution.
    Leaf { value: Vec<f64>, n: usize },
}

/// Regression targets or class codes driving split search.
pub(crate) enum Target<'a> {
    Values(&'a [f64]),
    Classes { codes: Vec<usize>, n_classes: usize },
}

pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub n_try: usize,
}

struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Grows a tree over the given rows (duplicates allowed) and returns its nodes,
/// root first. `leaf` computes the stored value for the rows reaching a leaf.
pub(crate) fn grow(
    x: &Matrix,
    rows: Vec<usize>,
    target: &Target<'_>,
    params: &GrowParams,
    rng: &mut ChaCha8Rng,
    leaf: &mut dyn FnMut(&[usize]) -> Vec<f64>,
) -> Vec<Node> {
    let mut nodes = Vec::new();
    grow_node(x, rows, target, params, rng, leaf, 0, &mut nodes);
    nodes
}

#[allow(clippy::too_many_arguments)]
fn grow_node(
    x: &Matrix,
    rows: Vec<usize>,
    target: &Target<'_>,
    params: &GrowParams,
    rng: &mut ChaCha8Rng,
    leaf: &mut dyn FnMut(&[usize]) -> Vec<f64>,
    depth: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    nodes.push(Node::Leaf { value: Vec::new(), n: rows.len() });
    let split = if depth < params.max_depth && rows.len() >= 2 * params.min_leaf {
        best_split(x, &rows, target, params, rng)
    } else {
        None
    };
    match split {
        None => {
            nodes[id] = Node::Leaf { value: leaf(&rows), n: rows.len() };
        }
        Some(b) => {
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x.get(i, b.feature) <= b.threshold);
            drop(rows);
            let left = grow_node(x, l, target, params, rng, leaf, depth + 1, nodes);
            let right = grow_node(x, r, target, params, rng, leaf, depth + 1, nodes);
            nodes[id] = Node::Split {
                feature: b.feature,
                threshold: b.threshold,
                left,
                right,
            };
        }
    }
    id
}

fn best_split(
    x: &Matrix,
    rows: &[usize],
    target: &Target<'_>,
    params: &GrowParams,
    rng: &mut ChaCha8Rng,
) -> Option<Best> {
    let p = x.n_cols();
    let features: Vec<usize> = if params.n_try >= p {
        (0..p).collect()
    } else {
        let mut f = sample(rng, p, params.n_try).into_vec();
        f.sort_unstable();
        f
    };
    let n = rows.len();
    let min_leaf = params.min_leaf.max(1);
    let parent = impurity_of(rows, target);
    if parent <= 1e-12 {
        return None;
    }
    let mut best: Option<Best> = None;
    let mut order = rows.to_vec();
    for &j in &features {
        order.copy_from_slice(rows);
        order.sort_by(|&a, &b| x.get(a, j).total_cmp(&x.get(b, j)).then(a.cmp(&b)));
        let mut scan = Scan::new(target, rows);
        for pos in 0..n - 1 {
            scan.move_left(order[pos], target);
            let (lo, hi) = (x.get(order[pos], j), x.get(order[pos + 1], j));
            let n_left = pos + 1;
            if lo >= hi || n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let gain = parent - scan.impurity();
            let threshold_gain = best.as_ref().map_or(1e-12 * parent.max(1.0), |b| b.gain);
            if gain > threshold_gain {
                let mid = lo + (hi - lo) / 2.0;
                let threshold = if mid < hi { mid } else { lo };
                best = Some(Best {
                    gain,
                    feature: j,
                    threshold,
                });
            }
        }
    }
    best
}

/// Total impurity (SSE or n·Gini) of a row set.
fn impurity_of(rows: &[usize], target: &Target<'_>) -> f64 {
    let mut s = Scan::new(target, rows);
    for &i in rows {
        s.move_left(i, target);
    }
    s.left_impurity()
}

/// Running sufficient statistics for a left/right partition sweep.
struct Scan {
    n_left: f64,
    n_right: f64,
    // regression: sum and sum of squares on each side
    sum: [f64; 2],
    sq: [f64; 2],
    // classification: per-class counts and the sum of squared counts
    counts: [Vec<f64>; 2],
    csq: [f64; 2],
    classes: bool,
}

impl Scan {
    fn new(target: &Target<'_>, rows: &[usize]) -> Self {
        let mut s = Scan {
            n_left: 0.0,
            n_right: rows.len() as f64,
            sum: [0.0; 2],
            sq: [0.0; 2],
            counts: [Vec::new(), Vec::new()],
            csq: [0.0; 2],
            classes: false,
        };
        match target {
            Target::Values(y) => {
                for &i in rows {
                    s.sum[1] += y[i];
                    s.sq[1] += y[i] * y[i];
                }
            }
            Target::Classes { codes, n_classes } => {
                s.classes = true;
                s.counts = [vec![0.0; *n_classes], vec![0.0; *n_classes]];
                for &i in rows {
                    s.counts[1][codes[i]] += 1.0;
                }
                s.csq[1] = s.counts[1].iter().map(|c| c * c).sum();
            }
        }
        s
    }

    fn move_left(&mut self, i: usize, target: &Target<'_>) {
        self.n_left += 1.0;
        self.n_right -= 1.0;
        match target {
            Target::Values(y) => {
                let v = y[i];
                self.sum[0] += v;
                self.sq[0] += v * v;
                self.sum[1] -= v;
                self.sq[1] -= v * v;
            }
            Target::Classes { codes, .. } => {
                let c = codes[i];
                self.csq[0] += 2.0 * self.counts[0][c] + 1.0;
                self.counts[0][c] += 1.0;
                self.csq[1] -= 2.0 * self.counts[1][c] - 1.0;
                self.counts[1][c] -= 1.0;
            }
        }
    }

    fn side(&self, s: usize, n: f64) -> f64 {
        if n <= 0.0 {
            return 0.0;
        }
        if self.classes {
            n - self.csq[s] / n
        } else {
            (self.sq[s] - self.sum[s] * self.sum[s] / n).max(0.0)
        }
    }

    fn left_impurity(&self) -> f64 {
        self.side(0, self.n_left)
    }

    fn impurity(&self) -> f64 {
        self.side(0, self.n_left) + self.side(1, self.n_right)
    }
}

pub(crate) fn descend<'a>(nodes: &'a [Node], row: &[f64]) -> &'a [f64] {
    let mut id = 0;
    loop {
        match &nodes[id] {
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => id = if row[*feature] <= *threshold { *left } else { *right },
            Node::Leaf { value, .. } => return value,
        }
    }
}

pub(crate) fn n_try(p: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("feature fraction {fraction} outside (0, 1]")));
    }
    Ok(((fraction * p as f64).round() as usize).clamp(1, p.max(1)))
}

pub(crate) fn class_target(d: &Dataset) -> Target<'static> {
    Target::Classes {
        codes: (0..d.n_rows()).map(|i| d.class_of(i)).collect(),
        n_classes: d.n_classes(),
    }
}

/// A fitted CART tree (Gini for classification, variance for regression).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub task: Task,
    pub n_features: usize,
    pub n_classes: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub nodes: Vec<Node>,
}

pub fn train_cart(d: &Dataset, cfg: &CartConfig) -> Result<DecisionTree> {
    let rows: Vec<usize> = (0..d.n_rows()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    fit_rows(d, rows, cfg, &mut rng)
}

/// Fits a tree on a (possibly bootstrapped) row multiset.
pub(crate) fn fit_rows(d: &Dataset, rows: Vec<usize>, cfg: &CartConfig, rng: &mut ChaCha8Rng) -> Result<DecisionTree> {
    if cfg.max_depth == 0 {
        return Err(Error::invalid("max_depth must be at least 1"));
    }
    if cfg.min_leaf == 0 {
        return Err(Error::invalid("min_leaf must be at least 1"));
    }
    if d.n_rows() < 2 * cfg.min_leaf {
        return Err(Error::invalid(format!(
            "{} rows are too few for min_leaf {}",
            d.n_rows(),
            cfg.min_leaf
        )));
    }
    let params = GrowParams {
        max_depth: cfg.max_depth,
        min_leaf: cfg.min_leaf,
        n_try: n_try(d.n_features(), cfg.feature_fraction)?,
    };
    let nodes = if d.task.is_classification() {
        let target = class_target(d);
        grow(&d.features, rows, &target, &params, rng, &mut |idx| class_distribution(d, idx))
    } else {
        let y = &d.target;
        grow(&d.features, rows, &Target::Values(y), &params, rng, &mut |idx| {
            vec![idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len().max(1) as f64]
        })
    };
    Ok(DecisionTree {
        task: d.task,
        n_features: d.n_features(),
        n_classes: d.n_classes(),
        max_depth: cfg.max_depth,
        min_leaf: cfg.min_leaf,
        nodes,
    })
}

impl DecisionTree {
    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn leaf_value(&self, row: &[f64]) -> &[f64] {
        descend(&self.nodes, row)
    }

    /// Split features used along with their thresholds, in node order.
    pub fn splits(&self) -> Vec<(usize, f64)> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, threshold, .. } => Some((*feature, *threshold)),
                Node::Leaf { .. } => None,
            })
            .collect()
    }
}

impl Predictor for DecisionTree {
    fn task(&self) -> Task {
        self.task
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict(&self, rows: &Matrix) -> Result<Prediction> {
        check_width(rows, self.n_features)?;
        Ok(if self.task.is_classification() {
            Prediction::Proba(rows.rows().map(|r| descend(&self.nodes, r).to_vec()).collect())
        } else {
            Prediction::Regression(rows.rows().map(|r| descend(&self.nodes, r)[0]).collect())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(xs: &[f64], ys: &[f64], task: Task) -> Dataset {
        let rows: Vec<Vec<f64>> = xs.iter().map(|&v| vec![v]).collect();
        Dataset::from_parts(Matrix::from_rows(&rows).unwrap(), ys.to_vec(), task).unwrap()
    }

    #[test]
    fn separable_threshold_depth_one() {
        let xs: Vec<f64> = (-10..10).map(|i| i as f64 + 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|&v| (v > 0.0) as u8 as f64).collect();
        let d = data(&xs, &ys, Task::Binary);
        let t = train_cart(&d, &CartConfig { max_depth: 1, ..Default::default() }).unwrap();
        assert_eq!(t.splits(), vec![(0, 0.0)]);
        let pred = t.predict(&d.features).unwrap().point();
        assert_eq!(pred, ys);
    }

    #[test]
    fn rejects_depth_zero_and_tiny_data() {
        let d = data(&[0.0, 1.0, 2.0], &[0.0, 1.0, 1.0], Task::Binary);
        assert!(train_cart(&d, &CartConfig { max_depth: 0, ..Default::default() }).is_err());
        assert!(train_cart(&d, &CartConfig { min_leaf: 2, ..Default::default() }).is_err());
    }

    #[test]
    fn pure_labels_give_single_leaf() {
        let d = data(&[0.0, 1.0, 2.0, 3.0], &[1.0; 4], Task::Regression);
        let t = train_cart(&d, &CartConfig::default()).unwrap();
        assert_eq!(t.nodes.len(), 1);
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        // Two identical columns: the split must use feature 0.
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, i as f64]).collect();
        let y: Vec<f64> = (0..8).map(|i| (i >= 4) as u8 as f64).collect();
        let d = Dataset::from_parts(Matrix::from_rows(&rows).unwrap(), y, Task::Binary).unwrap();
        let t = train_cart(&d, &CartConfig { max_depth: 1, ..Default::default() }).unwrap();
        assert_eq!(t.splits(), vec![(0, 3.5)]);
    }

    #[test]
    fn min_leaf_respected() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|v| (v * 1.7).sin()).collect();
        let d = data(&xs, &ys, Task::Regression);
        let t = train_cart(&d, &CartConfig { max_depth: 10, min_leaf: 3, ..Default::default() }).unwrap();
        for n in &t.nodes {
            if let Node::Leaf { n, .. } = n {
                assert!(*n >= 3);
            }
        }
        assert!(t.depth() <= 10);
    }
}
