//! Analytic gradients of the full objective against central differences on a
//! 6-node toy graph.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::Result;
use crate::graphdata::{gather_batch, BatchSubgraph, FraudGraph, Relation};
use crate::model::{objective, DignnConfig, DignnParams, NoiseDraw, TensorKind};
use crate::ndcore::rng::{stream_rng, Stream};
use crate::ndcore::Mat;

pub const TOY_NODES: usize = 6;
pub const TOY_FEATURES: usize = 4;
pub const TOY_D: usize = 3;
pub const TOY_HIDDEN: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckOptions {
    pub step: f64,
    /// Denominator floor of the relative error
    /// `|analytic - numeric| / max(|analytic|, |numeric|, floor)`.
    pub floor: f64,
    pub tolerance: f64,
    pub seed: u64,
    /// Test hook: negate the analytic gradient of this tensor.
    pub flip_sign: Option<String>,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            floor: 1e-6,
            tolerance: 1e-4,
            seed: 0,
            flip_sign: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorError {
    pub name: String,
    pub len: usize,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub alpha: f64,
    pub beta: f64,
    pub tensors: Vec<TensorError>,
    pub max_rel_err: f64,
    pub tolerance: f64,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= self.tolerance
    }
}

/// The toy: a 6-cycle with one chord, both classes present, Gaussian
/// features; parameters with non-zero biases so every tensor carries signal.
pub fn gradcheck_toy(cfg: &DignnConfig, seed: u64) -> Result<(BatchSubgraph, DignnParams, NoiseDraw)> {
    let mut rng = stream_rng(seed, Stream::Synth, 0);
    let mut features = Mat::zeros(TOY_NODES, TOY_FEATURES);
    for x in features.data_mut() {
        *x = rng.sample(StandardNormal);
    }
    let mut edges: Vec<(u32, u32)> = (0..TOY_NODES as u32).map(|i| (i, (i + 1) % TOY_NODES as u32)).collect();
    edges.push((0, 3));
    let labels = vec![0, 1, 0, 1, 0, 0];
    let g = FraudGraph::new(
        features,
        labels,
        vec![Relation {
            name: "toy".into(),
            edges,
        }],
    )?;
    let batch = gather_batch(&g, &(0..TOY_NODES).collect::<Vec<_>>())?;

    let mut params = DignnParams::init(cfg, TOY_NODES, TOY_FEATURES, &mut stream_rng(seed, Stream::Init, 0));
    let kinds: Vec<TensorKind> = params.entries().into_iter().map(|e| e.1).collect();
    let mut rng = stream_rng(seed, Stream::Init, 1);
    for (t, kind) in params.tensors_mut().into_iter().zip(kinds) {
        if kind == TensorKind::Bias {
            for x in t.data_mut() {
                *x = 0.1 * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    let noise = NoiseDraw::sample(TOY_NODES, cfg.d, &mut stream_rng(seed, Stream::Noise, 0));
    Ok((batch, params, noise))
}

fn toy_config(cfg: &DignnConfig) -> DignnConfig {
    DignnConfig {
        d: TOY_D,
        d_hidden: TOY_HIDDEN,
        mc_samples: 1,
        ..cfg.clone()
    }
}

/// Compares every parameter gradient of the total loss (with fixed noise)
/// against central differences.
pub fn gradcheck(cfg: &DignnConfig, opts: &GradcheckOptions) -> Result<GradcheckReport> {
    let cfg = toy_config(cfg);
    cfg.validate()?;
    let (batch, params, noise) = gradcheck_toy(&cfg, opts.seed)?;
    let noise = [noise];
    let analytic = objective(&cfg, &params, &batch, &noise, true)?.grads;
    let loss = |p: &DignnParams| -> Result<f64> { Ok(objective(&cfg, p, &batch, &noise, true)?.losses.total) };

    let mut probe = params.clone();
    let names: Vec<String> = params.entries().into_iter().map(|e| e.0).collect();
    let grads: Vec<&Mat> = analytic.entries().into_iter().map(|e| e.2).collect();
    let mut tensors = Vec::with_capacity(names.len());
    for (ti, name) in names.iter().enumerate() {
        let sign = if opts.flip_sign.as_deref() == Some(name.as_str()) {
            -1.0
        } else {
            1.0
        };
        let len = grads[ti].data().len();
        let (mut max_rel, mut max_abs) = (0.0f64, 0.0f64);
        for k in 0..len {
            let orig = probe.tensors_mut()[ti].data()[k];
            probe.tensors_mut()[ti].data_mut()[k] = orig + opts.step;
            let up = loss(&probe)?;
            probe.tensors_mut()[ti].data_mut()[k] = orig - opts.step;
            let down = loss(&probe)?;
            probe.tensors_mut()[ti].data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * opts.step);
            let a = sign * grads[ti].data()[k];
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(opts.floor);
            max_abs = max_abs.max(abs);
            max_rel = max_rel.max(rel);
        }
        tensors.push(TensorError {
            name: name.clone(),
            len,
            max_rel_err: max_rel,
            max_abs_err: max_abs,
        });
    }
    let max_rel_err = tensors.iter().map(|t| t.max_rel_err).fold(0.0, f64::max);
    Ok(GradcheckReport {
        alpha: cfg.alpha,
        beta: cfg.beta,
        tensors,
        max_rel_err,
        tolerance: opts.tolerance,
    })
}
