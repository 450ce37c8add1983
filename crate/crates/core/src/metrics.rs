//! Evaluation: class-balanced accuracy with Many/Medium/Few aggregates, binary
//! ranking metrics, and per-class accuracy gains between two runs.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data::{EvalSplits, LongTailedDataset};
use crate::error::{check_len, Error, Result};
use crate::model::MlpSpec;
use crate::params::ParamVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub per_class: Vec<f64>,
    /// Unweighted mean over classes.
    pub all: f64,
    pub many: Option<f64>,
    pub medium: Option<f64>,
    pub few: Option<f64>,
}

/// Mean of `values` over the classes in `set`; `None` for an empty set.
pub fn split_mean(values: &[f64], set: &BTreeSet<usize>) -> Option<f64> {
    if set.is_empty() {
        return None;
    }
    Some(set.iter().map(|&k| values[k]).sum::<f64>() / set.len() as f64)
}

impl ClassAccuracy {
    pub fn from_per_class(per_class: Vec<f64>, splits: &EvalSplits) -> Self {
        let all = per_class.iter().sum::<f64>() / per_class.len() as f64;
        Self {
            many: split_mean(&per_class, &splits.many),
            medium: split_mean(&per_class, &splits.medium),
            few: split_mean(&per_class, &splits.few),
            all,
            per_class,
        }
    }
}

/// Accuracy of each class from predicted and true labels.
pub fn accuracy_from_predictions(predicted: &[usize], labels: &[usize], num_classes: usize) -> Result<Vec<f64>> {
    check_len("predictions", labels.len(), predicted.len())?;
    let mut hit = vec![0usize; num_classes];
    let mut total = vec![0usize; num_classes];
    for (&p, &y) in predicted.iter().zip(labels) {
        if y >= num_classes {
            return Err(Error::invalid(format!("label {y} out of range")));
        }
        total[y] += 1;
        if p == y {
            hit[y] += 1;
        }
    }
    if let Some(k) = total.iter().position(|&t| t == 0) {
        return Err(Error::MissingClass(k));
    }
    Ok(hit.iter().zip(&total).map(|(&h, &t)| h as f64 / t as f64).collect())
}

/// Top-1 accuracy per class on `test`, aggregated over the evaluation splits.
pub fn per_class_accuracy(
    spec: &MlpSpec,
    params: &ParamVector,
    test: &LongTailedDataset,
    splits: &EvalSplits,
) -> Result<ClassAccuracy> {
    if test.num_classes() != spec.num_classes {
        return Err(Error::MissingClass(test.num_classes().min(spec.num_classes)));
    }
    let predicted = spec.predict_batch(params, &test.all()?.features)?;
    let per_class = accuracy_from_predictions(&predicted, test.labels(), spec.num_classes)?;
    Ok(ClassAccuracy::from_per_class(per_class, splits))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub auc_roc: f64,
    /// Average precision with the positive (anomaly / tail) class as target.
    pub auc_pr_anomaly: f64,
    /// Average precision with the negative (normal / head) class as target,
    /// ranking by descending `-score`.
    pub auc_pr_normal: f64,
}

fn check_binary(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    check_len("labels", scores.len(), labels.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores must not be NaN"));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClassLabels);
    }
    Ok((pos, neg))
}

/// Mann–Whitney estimate of `P(s⁺ > s⁻) + ½ P(s⁺ = s⁻)` using midranks.
pub fn auc_roc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_binary(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their average.
        let midrank = (i + j + 2) as f64 / 2.0;
        rank_sum += midrank * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Area under the precision-recall step curve (average precision). Tied
/// scores enter as one threshold.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, _) = check_binary(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        for &k in &order[i..=j] {
            if labels[k] {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j + 1;
    }
    Ok(ap)
}

/// AUCROC and AUCPR for both classes. `scores` are the probability of the
/// positive (tail) class; `labels` mark positives.
pub fn binary_rank_metrics(scores: &[f64], labels: &[bool]) -> Result<BinaryMetrics> {
    let auc = auc_roc(scores, labels)?;
    let anomaly = average_precision(scores, labels)?;
    let neg_scores: Vec<f64> = scores.iter().map(|s| -s).collect();
    let neg_labels: Vec<bool> = labels.iter().map(|l| !l).collect();
    let normal = average_precision(&neg_scores, &neg_labels)?;
    Ok(BinaryMetrics {
        auc_roc: auc,
        auc_pr_anomaly: anomaly,
        auc_pr_normal: normal,
    })
}

/// Per-class accuracy deltas `b − a` with split aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    pub per_class: Vec<f64>,
    pub all: f64,
    pub many: Option<f64>,
    pub medium: Option<f64>,
    pub few: Option<f64>,
}

pub fn accuracy_gain(a: &ClassAccuracy, b: &ClassAccuracy, splits: &EvalSplits) -> Result<GainReport> {
    if a.per_class.len() != b.per_class.len() {
        return Err(Error::Incomparable(format!(
            "{} vs {} classes",
            a.per_class.len(),
            b.per_class.len()
        )));
    }
    let per_class: Vec<f64> = a.per_class.iter().zip(&b.per_class).map(|(x, y)| y - x).collect();
    Ok(GainReport {
        all: b.all - a.all,
        many: split_mean(&per_class, &splits.many),
        medium: split_mean(&per_class, &splits.medium),
        few: split_mean(&per_class, &splits.few),
        per_class,
    })
}
