use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphdata::{FraudGraph, BENIGN, FRAUD};
use crate::ndcore::rng::{stream_rng, Stream};
use crate::ndcore::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.4,
            val: 0.2,
            test: 0.4,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
            return Err(Error::Split(format!("ratios must be positive, got {parts:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Split(format!("ratios must sum to 1, got {parts:?}")));
        }
        Ok(())
    }
}

/// Disjoint train/val/test node ids covering every labeled node. Each list is
/// sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndex {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per-class shuffle, then proportional assignment. Unlabeled nodes never
/// enter a split.
pub fn stratified_split(g: &FraudGraph, ratios: SplitRatios, seed: u64) -> Result<SplitIndex> {
    ratios.validate()?;
    let mut rng = stream_rng(seed, Stream::Split, 0);
    let mut split = SplitIndex {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for class in [BENIGN, FRAUD] {
        let mut ids: Vec<usize> = (0..g.num_nodes()).filter(|&i| g.labels()[i] == class).collect();
        if ids.len() < 3 {
            return Err(Error::Split(format!(
                "class {class} has {} labeled nodes; at least 3 are needed",
                ids.len()
            )));
        }
        ids.shuffle(&mut rng);
        let n = ids.len() as f64;
        let n_train = ((n * ratios.train).round() as usize).clamp(1, ids.len() - 2);
        let n_val = ((n * ratios.val).round() as usize).clamp(1, ids.len() - n_train - 1);
        split.train.extend_from_slice(&ids[..n_train]);
        split.val.extend_from_slice(&ids[n_train..n_train + n_val]);
        split.test.extend_from_slice(&ids[n_train + n_val..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Z-scores every feature column with mean/std taken over the training nodes
/// only. Columns whose training std is below `1e-12` become all-zero.
pub fn normalize_features(g: &FraudGraph, split: &SplitIndex) -> Result<FraudGraph> {
    if split.train.is_empty() {
        return Err(Error::Split("cannot normalize with an empty training set".into()));
    }
    let x = g.features();
    let d = x.cols();
    let n = split.train.len() as f64;
    let mut mean = vec![0.0; d];
    for &i in &split.train {
        for (m, &v) in mean.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for &i in &split.train {
        for ((s, &v), &m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std: Vec<f64> = var.iter().map(|s| (s / n).sqrt()).collect();

    let mut out = Mat::zeros(x.rows(), d);
    for r in 0..x.rows() {
        for (c, o) in out.row_mut(r).iter_mut().enumerate() {
            *o = if std[c] < 1e-12 {
                0.0
            } else {
                (x.get(r, c) - mean[c]) / std[c]
            };
        }
    }
    g.with_features(out)
}
