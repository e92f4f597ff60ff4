//! Imbalance-robust evaluation: F1-macro, rank AUC and GMean.
//!
//! Labels are class ids (0 benign, 1 fraud); class 1 is the positive class.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rank-sum AUC. Scores are ranked ascending and tied scores share their
/// average rank, so a tied positive/negative pair counts one half.
pub fn auc_rank(scores: &[f64], labels: &[usize]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension {
            op: "auc_rank",
            left: (scores.len(), 1),
            right: (labels.len(), 1),
        });
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::UndefinedMetric(format!("NaN score at position {i}")));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "AUC needs both classes ({pos} positive, {neg} negative)"
        )));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j+1
        let avg = (i + j + 2) as f64 / 2.0;
        pos_rank_sum += avg * order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// `sqrt(TPR * TNR)`.
pub fn gmean(tp: u64, fn_: u64, tn: u64, fp: u64) -> Result<f64> {
    if tp + fn_ == 0 || tn + fp == 0 {
        return Err(Error::UndefinedMetric(
            "GMean needs at least one positive and one negative".into(),
        ));
    }
    let tpr = tp as f64 / (tp + fn_) as f64;
    let tnr = tn as f64 / (tn + fp) as f64;
    Ok((tpr * tnr).sqrt())
}

/// `(tp, fp, tn, fn)` with class 1 positive.
pub fn confusion(preds: &[usize], labels: &[usize]) -> Result<(u64, u64, u64, u64)> {
    if preds.len() != labels.len() {
        return Err(Error::Dimension {
            op: "confusion",
            left: (preds.len(), 1),
            right: (labels.len(), 1),
        });
    }
    let mut c = (0, 0, 0, 0);
    for (i, (&p, &l)) in preds.iter().zip(labels).enumerate() {
        if p > 1 || l > 1 {
            return Err(Error::InvalidLabel {
                index: i,
                label: p.max(l) as i64,
            });
        }
        match (p, l) {
            (1, 1) => c.0 += 1,
            (1, 0) => c.1 += 1,
            (0, 0) => c.2 += 1,
            _ => c.3 += 1,
        }
    }
    Ok(c)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// F1 from counts; 0 when precision and recall are both undefined or zero.
fn f1(tp: u64, fp: u64, fn_: u64) -> f64 {
    ratio(2 * tp, 2 * tp + fp + fn_)
}

/// Unweighted mean of the two per-class F1 scores.
pub fn f1_macro(preds: &[usize], labels: &[usize]) -> Result<f64> {
    let (tp, fp, tn, fn_) = confusion(preds, labels)?;
    Ok((f1(tp, fp, fn_) + f1(tn, fn_, fp)) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub f1_macro: f64,
    pub auc: f64,
    pub gmean: f64,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub benign: ClassStats,
    pub fraud: ClassStats,
}

impl MetricsReport {
    pub fn num_samples(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// All metrics for fraud `scores`, argmax `preds` and true `labels`.
pub fn metrics_report(scores: &[f64], preds: &[usize], labels: &[usize]) -> Result<MetricsReport> {
    let auc = auc_rank(scores, labels)?;
    let (tp, fp, tn, fn_) = confusion(preds, labels)?;
    Ok(MetricsReport {
        f1_macro: (f1(tp, fp, fn_) + f1(tn, fn_, fp)) / 2.0,
        auc,
        gmean: gmean(tp, fn_, tn, fp)?,
        tp,
        fp,
        tn,
        fn_,
        benign: ClassStats {
            precision: ratio(tn, tn + fn_),
            recall: ratio(tn, tn + fp),
        },
        fraud: ClassStats {
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_extremes() {
        assert_eq!(auc_rank(&[0.9, 0.8, 0.1], &[1, 0, 0]).unwrap(), 1.0);
        assert_eq!(auc_rank(&[0.1, 0.8, 0.9], &[1, 0, 0]).unwrap(), 0.0);
        assert_eq!(auc_rank(&[0.5, 0.5, 0.5], &[1, 0, 0]).unwrap(), 0.5);
    }

    #[test]
    fn auc_single_class_is_undefined() {
        assert!(matches!(auc_rank(&[0.1, 0.2], &[0, 0]), Err(Error::UndefinedMetric(_))));
        assert!(matches!(auc_rank(&[0.1, 0.2], &[1, 1]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn gmean_examples() {
        assert_eq!(gmean(3, 0, 5, 0).unwrap(), 1.0);
        assert!((gmean(2, 0, 1, 1).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(gmean(0, 4, 3, 1).unwrap(), 0.0);
        assert!(gmean(0, 0, 3, 1).is_err());
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1_macro(&[1, 0, 0, 1], &[1, 0, 0, 1]).unwrap(), 1.0);
        let v = f1_macro(&[0, 0, 0, 0], &[1, 0, 0, 0]).unwrap();
        assert!((v - 3.0 / 7.0).abs() < 1e-12);
        let swapped = f1_macro(&[1, 1, 1, 1], &[0, 1, 1, 1]).unwrap();
        assert!((v - swapped).abs() < 1e-12);
    }

    #[test]
    fn report_counts_and_serialized_keys() {
        let r = metrics_report(&[0.9, 0.2, 0.7, 0.1], &[1, 0, 1, 0], &[1, 0, 0, 0]).unwrap();
        assert_eq!((r.tp, r.fp, r.tn, r.fn_), (1, 1, 2, 0));
        assert_eq!(r.num_samples(), 4);
        let json = serde_json::to_value(&r).unwrap();
        for k in ["f1_macro", "auc", "gmean", "tp", "fp", "tn", "fn"] {
            assert!(json.get(k).is_some(), "{k}");
        }
    }
}
