//! The training loop, evaluation, gradient checking and a feature-smoothing
//! baseline.
//!
//! One epoch of [`train`]:
//!
//! 1. pick the epoch's ids: a fresh class-balanced down-sample of the training
//!    nodes (minibatch mode) or every training node (fullbatch mode);
//! 2. cut them into `ceil(|ids| / batch_size)` batches (one batch in fullbatch
//!    mode);
//! 3. per batch: gather features and adjacency rows, draw reparameterization
//!    noise, forward, backward, one Adam step per tensor;
//! 4. record mean losses, mean attention over the training nodes and
//!    validation metrics, and keep a snapshot if validation AUC improved.
//!
//! Random streams (see [`crate::ndcore::rng`]): `Init/0` for parameters,
//! `Downsample/e` or `Shuffle/e` for epoch `e`'s ids and `Noise/e` for its
//! reparameterization draws.

mod baseline;
mod config;
mod gradcheck;
mod history;

pub use baseline::{smooth_features, SmoothingBaseline};
pub use config::{Ablation, TrainConfig, TrainMode};
pub use gradcheck::{gradcheck, gradcheck_toy, GradcheckOptions, GradcheckReport, TensorError};
pub use history::{EpochRecord, TrainHistory, HISTORY_COLUMNS};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::graphdata::{
    downsample_epoch, gather_batch, gather_inputs, make_batches, BatchSubgraph, FraudGraph, SplitIndex,
};
use crate::metrics::{metrics_report, MetricsReport};
use crate::model::{deterministic, objective, predict, DignnParams, NoiseDraw, ObjectiveOutput, TensorKind};
use crate::ndcore::rng::{stream_rng, Stream};
use crate::ndcore::{Adam, AdamState};

/// Hooks called during [`train_with_observer`].
pub trait TrainObserver {
    /// After the forward/backward pass of a batch, before the Adam step.
    fn on_batch(&mut self, _epoch: usize, _batch: &BatchSubgraph, _out: &ObjectiveOutput) {}
    /// After validation of an epoch.
    fn on_epoch(&mut self, _record: &EpochRecord, _params: &DignnParams) {}
}

impl TrainObserver for () {}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    /// Snapshot with the best validation AUC (earliest on ties).
    pub params: DignnParams,
    pub history: TrainHistory,
    /// 1-based epoch of `params`.
    pub best_epoch: usize,
    pub best_val: MetricsReport,
}

pub fn train(graph: &FraudGraph, split: &SplitIndex, cfg: &TrainConfig) -> Result<TrainOutput> {
    train_with_observer(graph, split, cfg, &mut ())
}

/// Ids trained on in epoch `epoch` (0-based).
pub fn epoch_ids(graph: &FraudGraph, split: &SplitIndex, cfg: &TrainConfig, epoch: usize) -> Result<Vec<usize>> {
    let index = epoch as u32;
    match cfg.mode {
        TrainMode::Fullbatch => Ok(split.train.clone()),
        TrainMode::Minibatch if cfg.downsample => downsample_epoch(
            &split.train,
            graph.labels(),
            &mut stream_rng(cfg.seed, Stream::Downsample, index),
        ),
        TrainMode::Minibatch => {
            let mut ids = split.train.clone();
            ids.shuffle(&mut stream_rng(cfg.seed, Stream::Shuffle, index));
            Ok(ids)
        }
    }
}

pub fn train_with_observer(
    graph: &FraudGraph,
    split: &SplitIndex,
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutput> {
    cfg.validate()?;
    if split.train.is_empty() || split.val.is_empty() {
        return Err(Error::Split("training and validation sets must be non-empty".into()));
    }
    let mcfg = &cfg.model;
    let mut params = DignnParams::init(
        mcfg,
        graph.num_nodes(),
        graph.feature_dim(),
        &mut stream_rng(cfg.seed, Stream::Init, 0),
    );
    let decay: Vec<bool> = params.entries().iter().map(|e| e.1 == TensorKind::Weight).collect();
    let mut states: Vec<AdamState> = params
        .entries()
        .iter()
        .map(|(_, _, m)| AdamState::for_shape(m.rows(), m.cols()))
        .collect();
    let adam = Adam::new(cfg.lr, cfg.weight_decay);
    let use_mi = cfg.ablation == Ablation::Full;

    let mut history = TrainHistory::default();
    let mut best: Option<(DignnParams, usize, MetricsReport)> = None;

    for epoch in 0..cfg.epochs {
        let ids = epoch_ids(graph, split, cfg, epoch)?;
        let batches = match cfg.mode {
            TrainMode::Fullbatch => vec![ids],
            TrainMode::Minibatch => make_batches(&ids, cfg.batch_size)?,
        };
        let mut noise_rng = stream_rng(cfg.seed, Stream::Noise, epoch as u32);
        let mut sums = [0.0f64; 4];
        let mut seen = 0usize;

        for batch_ids in &batches {
            let batch = gather_batch(graph, batch_ids)?;
            let draws: Vec<NoiseDraw> = (0..mcfg.mc_samples)
                .map(|_| NoiseDraw::sample(batch_ids.len(), mcfg.d, &mut noise_rng))
                .collect();
            let out = objective(mcfg, &params, &batch, &draws, use_mi)?;
            let l = out.losses;
            if !l.total.is_finite() {
                return Err(Error::Divergence {
                    epoch: epoch + 1,
                    last_finite_epoch: epoch,
                });
            }
            observer.on_batch(epoch + 1, &batch, &out);
            let w = batch_ids.len() as f64;
            for (s, v) in sums.iter_mut().zip([l.ce, l.rec, l.exc, l.total]) {
                *s += w * v;
            }
            seen += batch_ids.len();
            for (((p, g), st), &dec) in params
                .tensors_mut()
                .into_iter()
                .zip(out.grads.entries().iter().map(|e| e.2))
                .zip(states.iter_mut())
                .zip(&decay)
            {
                adam.step(p, g, st, dec);
            }
        }
        if !params.is_finite() {
            return Err(Error::Divergence {
                epoch: epoch + 1,
                last_finite_epoch: epoch,
            });
        }

        let diverged = Error::Divergence {
            epoch: epoch + 1,
            last_finite_epoch: epoch,
        };
        let (alpha_a, alpha_x) = mean_attention(&params, graph, &split.train)?;
        if !(alpha_a.is_finite() && alpha_x.is_finite()) {
            return Err(diverged);
        }
        // Finite but huge parameters can still overflow the logits.
        let batch = gather_batch(graph, &split.val)?;
        let pred = predict(&params, &batch.features, &batch.topo_rows)?;
        if pred.scores.iter().any(|s| !s.is_finite()) {
            return Err(diverged);
        }
        let val = metrics_report(&pred.scores, &pred.classes, &batch.labels)?;
        let n = seen as f64;
        let record = EpochRecord {
            epoch: epoch + 1,
            ce: sums[0] / n,
            rec: sums[1] / n,
            exc: sums[2] / n,
            total: sums[3] / n,
            alpha_a,
            alpha_x,
            num_batches: batches.len(),
            val: val.clone(),
        };
        observer.on_epoch(&record, &params);
        if best.as_ref().is_none_or(|b| val.auc > b.2.auc) {
            best = Some((params.clone(), epoch + 1, val));
        }
        history.epochs.push(record);
    }

    let (params, best_epoch, best_val) = best.expect("epochs >= 1");
    Ok(TrainOutput {
        params,
        history,
        best_epoch,
        best_val,
    })
}

/// Mean `(alpha_A, alpha_X)` of a deterministic forward over `ids`.
pub fn mean_attention(params: &DignnParams, graph: &FraudGraph, ids: &[usize]) -> Result<(f64, f64)> {
    let (features, topo) = gather_inputs(graph, ids)?;
    let (_, alpha, _) = deterministic(params, &features, &topo)?;
    let n = alpha.rows().max(1) as f64;
    let (mut a, mut x) = (0.0, 0.0);
    for r in 0..alpha.rows() {
        a += alpha.get(r, 0);
        x += alpha.get(r, 1);
    }
    Ok((a / n, x / n))
}

/// Deterministic forward over labeled `ids`, argmax predictions, full report.
pub fn evaluate(params: &DignnParams, graph: &FraudGraph, ids: &[usize]) -> Result<MetricsReport> {
    let batch = gather_batch(graph, ids)?;
    let pred = predict(params, &batch.features, &batch.topo_rows)?;
    metrics_report(&pred.scores, &pred.classes, &batch.labels)
}
