//! Synthetic fraud graphs whose topology can contradict their attributes.
//!
//! Labels are Bernoulli(`fraud_rate`). Features are unit-variance Gaussians;
//! the fraud class mean is shifted by `mean_separation / sqrt(D)` in every
//! coordinate so the two class means sit `mean_separation` apart.
//!
//! Edges come from a two-block model with exact block counts. With `k` the
//! average degree, `n_f` fraud nodes and `m = round(k N / 2)` edges:
//!
//! * fraud-fraud: `h * n_f * k / 2`
//! * fraud-benign: `(1 - h) * n_f * k` (capped by the benign degree budget)
//! * benign-benign: the remainder of `m`
//!
//! so a fraud node's neighbors are same-class with probability `h` and every
//! class keeps average degree `k`. Endpoints are uniform within their class;
//! self-loops are redrawn and duplicate pairs are left for the loader to
//! collapse.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphdata::{FraudGraph, Relation, BENIGN, FRAUD};
use crate::ndcore::rng::{stream_rng, Stream};
use crate::ndcore::Mat;

pub const SYNTH_RELATION: &str = "synth";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_nodes: usize,
    pub feature_dim: usize,
    pub fraud_rate: f64,
    pub mean_separation: f64,
    pub homophily: f64,
    pub avg_degree: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_nodes: 4000,
            feature_dim: 16,
            fraud_rate: 0.15,
            mean_separation: 2.33,
            homophily: 0.19,
            avg_degree: 20.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::Config(what));
        if self.num_nodes < 2 {
            return bad(format!("num_nodes must be >= 2, got {}", self.num_nodes));
        }
        if self.feature_dim < 1 {
            return bad("feature_dim must be >= 1".into());
        }
        if !(self.fraud_rate > 0.0 && self.fraud_rate < 1.0) {
            return bad(format!("fraud_rate must lie in (0, 1), got {}", self.fraud_rate));
        }
        if !(self.mean_separation >= 0.0 && self.mean_separation.is_finite()) {
            return bad(format!("mean_separation must be >= 0, got {}", self.mean_separation));
        }
        if !(0.0..=1.0).contains(&self.homophily) {
            return bad(format!("homophily must lie in [0, 1], got {}", self.homophily));
        }
        if !(self.avg_degree >= 0.0 && self.avg_degree.is_finite()) {
            return bad(format!("avg_degree must be >= 0, got {}", self.avg_degree));
        }
        Ok(())
    }
}

pub fn synth_generate(cfg: &SynthConfig) -> Result<FraudGraph> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, Stream::Synth, 0);
    let (n, d) = (cfg.num_nodes, cfg.feature_dim);

    let labels: Vec<i8> = (0..n)
        .map(|_| if rng.random_bool(cfg.fraud_rate) { FRAUD } else { BENIGN })
        .collect();

    // f32-representable so the graph survives a disk round trip unchanged.
    let shift = cfg.mean_separation / (d as f64).sqrt();
    let mut features = Mat::zeros(n, d);
    for (i, &l) in labels.iter().enumerate() {
        let mu = if l == FRAUD { shift } else { 0.0 };
        for x in features.row_mut(i) {
            let z: f64 = rng.sample(StandardNormal);
            *x = (mu + z) as f32 as f64;
        }
    }

    let fraud: Vec<u32> = (0..n as u32).filter(|&i| labels[i as usize] == FRAUD).collect();
    let benign: Vec<u32> = (0..n as u32).filter(|&i| labels[i as usize] == BENIGN).collect();
    let k = cfg.avg_degree;
    let total = (k * n as f64 / 2.0).round() as usize;
    let fraud_stubs = fraud.len() as f64 * k;
    let benign_stubs = benign.len() as f64 * k;
    let mut ff = (cfg.homophily * fraud_stubs / 2.0).round() as usize;
    let mut fb = ((1.0 - cfg.homophily) * fraud_stubs).min(benign_stubs).round() as usize;
    if fraud.len() < 2 {
        ff = 0;
    }
    if fraud.is_empty() || benign.is_empty() {
        fb = 0;
    }
    let bb = if benign.len() < 2 {
        0
    } else {
        total.saturating_sub(ff + fb)
    };

    let mut edges = Vec::with_capacity(ff + fb + bb);
    let mut draw = |from: &[u32], to: &[u32], count: usize, rng: &mut crate::ndcore::rng::Rng| {
        for _ in 0..count {
            loop {
                let a = from[rng.random_range(0..from.len())];
                let b = to[rng.random_range(0..to.len())];
                if a != b {
                    edges.push((a, b));
                    break;
                }
            }
        }
    };
    draw(&fraud, &fraud, ff, &mut rng);
    draw(&fraud, &benign, fb, &mut rng);
    draw(&benign, &benign, bb, &mut rng);

    FraudGraph::new(
        features,
        labels,
        vec![Relation {
            name: SYNTH_RELATION.to_string(),
            edges,
        }],
    )
}
