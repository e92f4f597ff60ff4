use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::metrics::MetricsReport;

/// Summary of one completed epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Node-weighted means over the epoch's batches.
    pub ce: f64,
    pub rec: f64,
    pub exc: f64,
    pub total: f64,
    /// Mean attention weights over all training nodes after the epoch.
    pub alpha_a: f64,
    pub alpha_x: f64,
    pub num_batches: usize,
    pub val: MetricsReport,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

pub const HISTORY_COLUMNS: [&str; 11] = [
    "epoch",
    "ce",
    "rec",
    "exc",
    "total",
    "alpha_a",
    "alpha_x",
    "num_batches",
    "val_f1_macro",
    "val_auc",
    "val_gmean",
];

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// Index of the first epoch with the highest validation AUC.
    pub fn best_index(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, r) in self.epochs.iter().enumerate() {
            if best.is_none_or(|b| r.val.auc > self.epochs[b].val.auc) {
                best = Some(i);
            }
        }
        best
    }

    /// One row per epoch in [`HISTORY_COLUMNS`] order. Floats use Rust's
    /// shortest round-trip formatting.
    pub fn to_csv(&self) -> String {
        let mut s = HISTORY_COLUMNS.join(",");
        s.push('\n');
        for r in &self.epochs {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.epoch,
                r.ce,
                r.rec,
                r.exc,
                r.total,
                r.alpha_a,
                r.alpha_x,
                r.num_batches,
                r.val.f1_macro,
                r.val.auc,
                r.val.gmean
            );
        }
        s
    }
}
