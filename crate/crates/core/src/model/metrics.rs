use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ekg::Label;

/// Scores at or above this are predicted bankrupt.
pub const THRESHOLD: f64 = 0.5;

/// Confusion counts with bankrupt as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub r#fn: usize,
}

impl Confusion {
    pub fn from_scores(scores: &[f64], labels: &[Label]) -> Self {
        let mut c = Confusion::default();
        for (&s, &l) in scores.iter().zip(labels) {
            match (s >= THRESHOLD, l == Label::Bankrupt) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.r#fn += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.r#fn
    }
}

/// Threshold metrics plus AUC. Precision, recall and F1 are 0 when their
/// denominators vanish; AUC is `None` unless both classes occur.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: Option<f64>,
    pub confusion: Confusion,
}

impl MetricsReport {
    pub fn compute(scores: &[f64], labels: &[Label]) -> Self {
        let c = Confusion::from_scores(scores, labels);
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.r#fn);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            accuracy: ratio(c.tp + c.tn, c.total()),
            precision,
            recall,
            f1,
            auc: auc(scores, labels),
            confusion: c,
        }
    }

    /// Validation selection score, the mean of accuracy and F1.
    pub fn selection_score(&self) -> f64 {
        0.5 * (self.accuracy + self.f1)
    }
}

/// Area under the ROC curve via the rank-sum statistic, ties sharing their
/// mid-rank.
pub fn auc(scores: &[f64], labels: &[Label]) -> Option<f64> {
    let n_pos = labels.iter().filter(|&&l| l == Label::Bankrupt).count();
    let n_neg = labels.len() - n_pos;
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
        // ranks i+1 ..= j+1 share their mean
        let mid = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            if labels[k] == Label::Bankrupt {
                rank_sum += mid;
            }
        }
        i = j + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}
