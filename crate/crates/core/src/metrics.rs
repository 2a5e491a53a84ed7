//! Accuracy, precision, recall, F1 and ROC AUC for a binary scorer.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{LnnError, Result};
use crate::training::{classify, TrainedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn check_lengths(probs: &[f64], labels: &[u8]) -> Result<()> {
    if probs.len() != labels.len() {
        return Err(LnnError::structure(format!(
            "{} scores but {} labels",
            probs.len(),
            labels.len()
        )));
    }
    if let Some(y) = labels.iter().find(|&&y| y > 1) {
        return Err(LnnError::structure(format!("label must be 0 or 1, got {y}")));
    }
    Ok(())
}

/// Counts at `threshold`, predicting positive when `p >= threshold`.
pub fn confusion(probs: &[f64], labels: &[u8], threshold: f64) -> Result<Confusion> {
    check_lengths(probs, labels)?;
    let mut c = Confusion::default();
    for (&p, &y) in probs.iter().zip(labels) {
        match (classify(p, threshold), y) {
            (1, 1) => c.tp += 1,
            (1, _) => c.fp += 1,
            (_, 1) => c.fn_ += 1,
            _ => c.tn += 1,
        }
    }
    Ok(c)
}

fn class_counts(labels: &[u8]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(LnnError::UndefinedMetric(format!(
            "AUC needs both classes ({pos} positive, {neg} negative)"
        )));
    }
    Ok((pos, neg))
}

/// Mann-Whitney AUC: the fraction of (positive, negative) pairs ranked
/// correctly, tied pairs counting one half.
pub fn roc_auc(probs: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths(probs, labels)?;
    let (pos, neg) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]));
    // Ranks are 1-based; a tie group spanning ranks i..=j gets (i + j) / 2.
    // Every quantity below is an integer or half-integer, so the sum is exact.
    let mut positive_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && probs[order[end + 1]] == probs[order[start]] {
            end += 1;
        }
        let avg_rank = (start + end + 2) as f64 / 2.0;
        let group_pos = order[start..=end].iter().filter(|&&i| labels[i] == 1).count();
        positive_rank_sum += avg_rank * group_pos as f64;
        start = end + 1;
    }
    let u = positive_rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// `None` for the leading (0, 0) point, which lies above every score.
    pub threshold: Option<f64>,
    pub fpr: f64,
    pub tpr: f64,
}

/// Cumulative (false positive, true positive) counts at each distinct score,
/// from the highest threshold down, starting at (0, 0).
fn roc_counts(probs: &[f64], labels: &[u8]) -> Vec<(Option<f64>, usize, usize)> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
    let mut out = vec![(None, 0, 0)];
    let (mut fp, mut tp) = (0, 0);
    for (k, &i) in order.iter().enumerate() {
        if labels[i] == 1 {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_group = k + 1 == order.len() || probs[order[k + 1]] != probs[i];
        if last_of_group {
            out.push((Some(probs[i]), fp, tp));
        }
    }
    out
}

/// ROC curve with one point per distinct score.
pub fn roc_curve(probs: &[f64], labels: &[u8]) -> Result<Vec<RocPoint>> {
    check_lengths(probs, labels)?;
    let (pos, neg) = class_counts(labels)?;
    Ok(roc_counts(probs, labels)
        .into_iter()
        .map(|(threshold, fp, tp)| RocPoint {
            threshold,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        })
        .collect())
}

/// Trapezoidal area under [`roc_curve`], accumulated in integer counts.
pub fn trapezoid_auc(probs: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths(probs, labels)?;
    let (pos, neg) = class_counts(labels)?;
    let counts = roc_counts(probs, labels);
    // twice the area in units of (1 negative) x (1 positive)
    let twice: usize = counts
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) * (w[0].2 + w[1].2))
        .sum();
    Ok(twice as f64 / 2.0 / (pos as f64 * neg as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub threshold: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    #[serde(flatten)]
    pub confusion: Confusion,
    /// Set when nothing was predicted positive; precision is then reported as 0.
    pub precision_degenerate: bool,
    pub roc: Vec<RocPoint>,
}

/// Full report from scores and labels.
pub fn evaluate_scores(probs: &[f64], labels: &[u8], threshold: f64) -> Result<EvalReport> {
    if probs.is_empty() {
        return Err(LnnError::UndefinedMetric("no records to evaluate".into()));
    }
    let c = confusion(probs, labels, threshold)?;
    let auc = roc_auc(probs, labels)?;
    let roc = roc_curve(probs, labels)?;
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(EvalReport {
        n: probs.len(),
        threshold,
        accuracy: (c.tp + c.tn) as f64 / probs.len() as f64,
        precision,
        recall,
        f1,
        auc,
        confusion: c,
        precision_degenerate: c.tp + c.fp == 0,
        roc,
    })
}

pub fn evaluate(model: &TrainedModel, test: &Dataset, threshold: f64) -> Result<EvalReport> {
    evaluate_scores(&model.predict_dataset(test), &test.labels, threshold)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_examples() {
        assert_eq!(
            confusion(&[1.0, 0.0], &[1, 0], 0.5).unwrap(),
            Confusion {
                tp: 1,
                fp: 0,
                tn: 1,
                fn_: 0
            }
        );
        assert_eq!(confusion(&[1.0, 1.0], &[0, 0], 0.5).unwrap().fp, 2);
        assert!(confusion(&[1.0], &[1, 0], 0.5).is_err());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &[1, 1, 0, 0]).unwrap(), 0.0);
        assert_eq!(roc_auc(&[0.4; 6], &[1, 0, 1, 0, 0, 1]).unwrap(), 0.5);
        assert!(matches!(
            roc_auc(&[0.3, 0.6], &[1, 1]),
            Err(LnnError::UndefinedMetric(_))
        ));
    }

    #[test]
    fn curve_endpoints() {
        let roc = roc_curve(&[0.9, 0.3, 0.3, 0.1], &[1, 0, 1, 0]).unwrap();
        assert_eq!((roc[0].fpr, roc[0].tpr), (0.0, 0.0));
        let last = roc.last().unwrap();
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        assert_eq!(roc.len(), 4);
    }

    #[test]
    fn perfect_scorer_report() {
        let labels = [1, 0, 0, 1, 0];
        let probs: Vec<f64> = labels.iter().map(|&y| y as f64).collect();
        let r = evaluate_scores(&probs, &labels, 0.5).unwrap();
        for m in [r.accuracy, r.precision, r.recall, r.f1, r.auc] {
            assert_eq!(m, 1.0);
        }
        assert!(!r.precision_degenerate);
    }

    #[test]
    fn constant_zero_scorer_is_degenerate() {
        let r = evaluate_scores(&[0.0; 4], &[1, 0, 1, 0], 0.5).unwrap();
        assert_eq!(r.recall, 0.0);
        assert_eq!(r.precision, 0.0);
        assert_eq!(r.f1, 0.0);
        assert!(r.precision_degenerate);
        assert_eq!(r.auc, 0.5);
        assert_eq!(r.accuracy, 0.5);
    }
}
