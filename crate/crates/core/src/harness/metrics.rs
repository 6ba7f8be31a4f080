use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Task;
use crate::error::{Error, Result};
use crate::learners::{argmax, Prediction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "MSE")]
    Mse,
    #[serde(rename = "MAE")]
    Mae,
    R2,
    Accuracy,
    F1,
    #[serde(rename = "AUROC")]
    Auroc,
}

impl Metric {
    pub const REGRESSION: [Metric; 3] = [Metric::Mse, Metric::Mae, Metric::R2];
    pub const CLASSIFICATION: [Metric; 3] = [Metric::Accuracy, Metric::F1, Metric::Auroc];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Mse => "MSE",
            Metric::Mae => "MAE",
            Metric::R2 => "R2",
            Metric::Accuracy => "Accuracy",
            Metric::F1 => "F1",
            Metric::Auroc => "AUROC",
        }
    }

    pub fn higher_is_better(self) -> bool {
        !matches!(self, Metric::Mse | Metric::Mae)
    }

    pub fn for_task(task: Task) -> [Metric; 3] {
        if task.is_classification() {
            Self::CLASSIFICATION
        } else {
            Self::REGRESSION
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Metric::Mse, Metric::Mae, Metric::R2, Metric::Accuracy, Metric::F1, Metric::Auroc]
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown metric `{s}`")))
    }
}

pub fn mse(pred: &[f64], truth: &[f64]) -> f64 {
    pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / truth.len() as f64
}

pub fn mae(pred: &[f64], truth: &[f64]) -> f64 {
    pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / truth.len() as f64
}

/// `1 - SS_res / SS_tot`; a constant truth gives 1 for a perfect fit and 0 otherwise.
pub fn r2(pred: &[f64], truth: &[f64]) -> f64 {
    let m = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    let ss_tot: f64 = truth.iter().map(|t| (t - m).powi(2)).sum();
    if ss_tot == 0.0 {
        return if ss_res == 0.0 { 1.0 } else { 0.0 };
    }
    1.0 - ss_res / ss_tot
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

fn f1_of(pred: &[usize], truth: &[usize], c: usize) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p == c, t == c) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fn_ += 1.0,
            _ => {}
        }
    }
    if tp == 0.0 {
        return if fp == 0.0 && fn_ == 0.0 { 1.0 } else { 0.0 };
    }
    2.0 * tp / (2.0 * tp + fp + fn_)
}

/// Positive-class F1 for two classes, macro average over the classes seen in
/// either vector otherwise.
pub fn f1(pred: &[usize], truth: &[usize], n_classes: usize) -> f64 {
    if n_classes <= 2 {
        return f1_of(pred, truth, 1);
    }
    let seen: Vec<usize> = (0..n_classes)
        .filter(|c| pred.contains(c) || truth.contains(c))
        .collect();
    seen.iter().map(|&c| f1_of(pred, truth, c)).sum::<f64>() / seen.len().max(1) as f64
}

/// Mann-Whitney AUROC with tied scores counted as half. `None` unless both
/// labels occur.
pub fn auroc_binary(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += order[i..=j].iter().filter(|&&r| positive[r]).count() as f64 * avg;
        i = j + 1;
    }
    let (np, nn) = (n_pos as f64, n_neg as f64);
    Some((rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}

/// One-vs-rest macro AUROC over the classes that have both positives and negatives.
pub fn auroc(proba: &[Vec<f64>], truth: &[usize]) -> Option<f64> {
    let k = proba.first().map_or(0, Vec::len);
    if k == 2 {
        let s: Vec<f64> = proba.iter().map(|r| r[1]).collect();
        return auroc_binary(&s, &truth.iter().map(|&t| t == 1).collect::<Vec<_>>());
    }
    let per_class: Vec<f64> = (0..k)
        .filter_map(|c| {
            let s: Vec<f64> = proba.iter().map(|r| r[c]).collect();
            auroc_binary(&s, &truth.iter().map(|&t| t == c).collect::<Vec<_>>())
        })
        .collect();
    (!per_class.is_empty()).then(|| per_class.iter().sum::<f64>() / per_class.len() as f64)
}

/// All metrics applicable to the task. AUROC is left out when the truth holds a single class.
pub fn metrics(pred: &Prediction, truth: &[f64], task: Task) -> Result<BTreeMap<Metric, f64>> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} targets",
            pred.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::invalid("metrics of an empty evaluation set"));
    }
    let mut out = BTreeMap::new();
    match (pred, task) {
        (Prediction::Regression(p), Task::Regression) => {
            out.insert(Metric::Mse, mse(p, truth));
            out.insert(Metric::Mae, mae(p, truth));
            out.insert(Metric::R2, r2(p, truth));
        }
        (Prediction::Proba(p), Task::Binary | Task::Multiclass) => {
            let labels: Vec<usize> = truth.iter().map(|&t| t as usize).collect();
            let hard: Vec<usize> = p.iter().map(|r| argmax(r)).collect();
            let k = p.first().map_or(2, Vec::len);
            out.insert(Metric::Accuracy, accuracy(&hard, &labels));
            out.insert(Metric::F1, f1(&hard, &labels, k));
            if let Some(a) = auroc(p, &labels) {
                out.insert(Metric::Auroc, a);
            }
        }
        _ => return Err(Error::invalid("prediction kind does not match the task")),
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn perfect_predictions() {
        let y = vec![1.0, 2.0, 4.0];
        let m = metrics(&Prediction::Regression(y.clone()), &y, Task::Regression).unwrap();
        assert_eq!((m[&Metric::Mse], m[&Metric::Mae], m[&Metric::R2]), (0.0, 0.0, 1.0));
        let p = Prediction::Proba(vec![vec![0.9, 0.1], vec![0.2, 0.8], vec![0.4, 0.6]]);
        let m = metrics(&p, &[0.0, 1.0, 1.0], Task::Binary).unwrap();
        assert_eq!((m[&Metric::Accuracy], m[&Metric::F1], m[&Metric::Auroc]), (1.0, 1.0, 1.0));
    }

    #[test]
    fn mean_prediction_has_zero_r2() {
        let y = [1.0, 2.0, 6.0];
        assert_eq!(r2(&[3.0; 3], &y), 0.0);
    }

    #[test]
    fn single_class_auroc_is_absent() {
        let p = Prediction::Proba(vec![vec![0.3, 0.7], vec![0.6, 0.4]]);
        let m = metrics(&p, &[1.0, 1.0], Task::Binary).unwrap();
        assert!(!m.contains_key(&Metric::Auroc));
    }

    #[test]
    fn random_scores_auroc_near_half() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let s: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
        let y: Vec<bool> = (0..10_000).map(|_| rng.random()).collect();
        let a = auroc_binary(&s, &y).unwrap();
        assert!((0.47..=0.53).contains(&a), "{a}");
    }

    #[test]
    fn ties_count_half() {
        assert_eq!(auroc_binary(&[0.5, 0.5], &[true, false]), Some(0.5));
    }

    #[test]
    fn macro_f1() {
        let pred = [0, 1, 2, 2];
        let truth = [0, 1, 2, 1];
        let v = f1(&pred, &truth, 3);
        let expect = (1.0 + 2.0 / 3.0 + 2.0 / 3.0) / 3.0;
        assert!((v - expect).abs() < 1e-12);
    }
}
