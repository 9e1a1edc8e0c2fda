use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary confusion counts with label 1 as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

fn check_binary(labels: &[u8], what: &str) -> Result<()> {
    if let Some(l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::invalid(format!("{what} contains non-binary label {l}")));
    }
    Ok(())
}

pub fn confusion(truth: &[u8], predicted: &[u8]) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: predicted.len(),
        });
    }
    check_binary(truth, "truth")?;
    check_binary(predicted, "predictions")?;
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in truth.iter().zip(predicted) {
        match (t, p) {
            (1, 1) => cm.tp += 1,
            (0, 1) => cm.fp += 1,
            (0, 0) => cm.tn += 1,
            _ => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

/// Precision, recall and F1. A ratio whose denominator is zero is reported
/// as 0 and sets `degenerate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub degenerate: bool,
}

pub fn precision_recall_f1(cm: &ConfusionMatrix) -> Prf {
    let mut degenerate = false;
    let mut ratio = |num: usize, den: usize| {
        if den == 0 {
            degenerate = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f1 = if precision + recall == 0.0 {
        degenerate = true;
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf {
        precision,
        recall,
        f1,
        degenerate,
    }
}

/// Area under the ROC curve as the Mann-Whitney statistic: the probability
/// that a random positive scores above a random negative, ties counting
/// one half. Computed from midranks in `O(n log n)`.
pub fn roc_auc(labels: &[u8], scores: &[f64]) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: scores.len(),
        });
    }
    check_binary(labels, "labels")?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
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
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += midrank * order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Summary of one evaluation: counts, derived ratios and, when scores were
/// available and both classes present, the AUC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub confusion: ConfusionMatrix,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: Option<f64>,
    pub degenerate: bool,
}

impl MetricsReport {
    pub fn from_confusion(confusion: ConfusionMatrix, auc: Option<f64>) -> Self {
        let prf = precision_recall_f1(&confusion);
        MetricsReport {
            confusion,
            precision: prf.precision,
            recall: prf.recall,
            f1: prf.f1,
            auc,
            degenerate: prf.degenerate,
        }
    }

    pub fn from_predictions(truth: &[u8], predicted: &[u8], scores: Option<&[f64]>) -> Result<Self> {
        let cm = confusion(truth, predicted)?;
        let auc = match scores {
            Some(s) => match roc_auc(truth, s) {
                Ok(a) => Some(a),
                Err(Error::SingleClass) => None,
                Err(e) => return Err(e),
            },
            None => None,
        };
        Ok(Self::from_confusion(cm, auc))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_example() {
        let cm = confusion(&[1, 1, 1, 0, 0, 0, 0], &[1, 1, 0, 1, 0, 0, 0]).unwrap();
        assert_eq!(
            cm,
            ConfusionMatrix {
                tp: 2,
                fp: 1,
                tn: 3,
                fn_: 1
            }
        );
        let m = precision_recall_f1(&cm);
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!(!m.degenerate);
    }

    #[test]
    fn degenerate_cases_are_flagged_not_errors() {
        let none_predicted = precision_recall_f1(&ConfusionMatrix {
            tp: 0,
            fp: 0,
            tn: 5,
            fn_: 3,
        });
        assert_eq!((none_predicted.precision, none_predicted.f1), (0.0, 0.0));
        assert!(none_predicted.degenerate);
        let no_positives = precision_recall_f1(&ConfusionMatrix {
            tp: 0,
            fp: 2,
            tn: 5,
            fn_: 0,
        });
        assert_eq!(no_positives.recall, 0.0);
        assert!(no_positives.degenerate);
        let perfect = precision_recall_f1(&ConfusionMatrix {
            tp: 4,
            fp: 0,
            tn: 1,
            fn_: 0,
        });
        assert_eq!(perfect.f1, 1.0);
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0, 0, 1, 1], &[0.1, 0.4, 0.35, 0.8]).unwrap(), 0.75);
        assert_eq!(roc_auc(&[0, 1], &[0.5, 0.5]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[1, 0], &[0.9, 0.1]).unwrap(), 1.0);
        assert!(matches!(roc_auc(&[1, 1], &[0.2, 0.3]), Err(Error::SingleClass)));
        assert!(roc_auc(&[1, 0], &[0.2]).is_err());
    }

    #[test]
    fn report_skips_auc_for_single_class() {
        let r = MetricsReport::from_predictions(&[1, 1], &[1, 0], Some(&[0.9, 0.2])).unwrap();
        assert_eq!(r.auc, None);
        assert_eq!(r.recall, 0.5);
    }

    proptest! {
        #[test]
        fn auc_is_rank_invariant(labels in prop::collection::vec(0u8..2, 2..30), seed in any::<u64>()) {
            prop_assume!(labels.contains(&0) && labels.contains(&1));
            let scores: Vec<f64> = labels.iter().enumerate()
                .map(|(i, _)| ((i as u64).wrapping_mul(seed | 1) % 17) as f64)
                .collect();
            let a = roc_auc(&labels, &scores).unwrap();
            let squashed: Vec<f64> = scores.iter().map(|s| (s / 5.0).tanh()).collect();
            let b = roc_auc(&labels, &squashed).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            let flipped: Vec<f64> = scores.iter().map(|s| -s).collect();
            prop_assert!((roc_auc(&labels, &flipped).unwrap() - (1.0 - a)).abs() < 1e-12);
        }

        #[test]
        fn metrics_stay_in_unit_interval(truth in prop::collection::vec(0u8..2, 1..40), noise in prop::collection::vec(0u8..2, 40)) {
            let pred: Vec<u8> = truth.iter().zip(&noise).map(|(t, n)| t ^ n).collect();
            let cm = confusion(&truth, &pred).unwrap();
            prop_assert_eq!(cm.total(), truth.len());
            let m = precision_recall_f1(&cm);
            for v in [m.precision, m.recall, m.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
