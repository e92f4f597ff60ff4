//! Homophily-assuming reference model: every node's features are replaced by
//! the mean over its closed neighborhood, then a two-layer MLP classifies.

use crate::error::Result;
use crate::graphdata::{make_batches, FraudGraph, SplitIndex};
use crate::metrics::{metrics_report, MetricsReport};
use crate::model::{Linear, Mlp, Prediction};
use crate::ndcore::rng::{stream_rng, Stream};
use crate::ndcore::{Adam, AdamState, Mat, Tape, Var};
use crate::trainer::{epoch_ids, TrainConfig, TrainMode};

/// `D^-1 (A + I) X` over the union adjacency.
pub fn smooth_features(g: &FraudGraph) -> Mat {
    let adj = g.union_adj();
    let x = g.features();
    let mut out = Mat::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        let row = out.row_mut(i);
        row.copy_from_slice(x.row(i));
        for &j in adj.row_cols(i) {
            for (o, v) in row.iter_mut().zip(x.row(j)) {
                *o += v;
            }
        }
        let k = (adj.row_nnz(i) + 1) as f64;
        row.iter_mut().for_each(|o| *o /= k);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingBaseline {
    pub mlp: Mlp<Mat>,
    pub features: Mat,
    pub best_epoch: usize,
}

fn forward(tape: &mut Tape, mlp: &Mlp<Var>, x: Var) -> Result<Var> {
    let l0 = &mlp.layers[0];
    let h = tape.matmul(x, l0.w)?;
    let h = tape.add_row(h, l0.b)?;
    let h = tape.relu(h);
    let l1 = &mlp.layers[1];
    let o = tape.matmul(h, l1.w)?;
    tape.add_row(o, l1.b)
}

fn bind(tape: &mut Tape, mlp: &Mlp<Mat>) -> Mlp<Var> {
    Mlp {
        layers: mlp
            .layers
            .iter()
            .map(|l| Linear {
                w: tape.leaf(l.w.clone()),
                b: tape.leaf(l.b.clone()),
            })
            .collect(),
    }
}

fn evaluate_mlp(mlp: &Mlp<Mat>, features: &Mat, g: &FraudGraph, ids: &[usize]) -> Result<MetricsReport> {
    let mut tape = Tape::new();
    let vars = bind(&mut tape, mlp);
    let x = tape.leaf(features.select_rows(ids));
    let logits = forward(&mut tape, &vars, x)?;
    let pred = Prediction::from_logits(tape.value(logits));
    let labels: Vec<usize> = ids.iter().map(|&i| g.labels()[i] as usize).collect();
    metrics_report(&pred.scores, &pred.classes, &labels)
}

impl SmoothingBaseline {
    /// Trains with the same epochs, batching, down-sampling, optimizer and
    /// best-validation-AUC selection as the main model. `cfg.model.d_hidden`
    /// sets the hidden width.
    pub fn fit(g: &FraudGraph, split: &SplitIndex, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let features = smooth_features(g);
        let mut rng = stream_rng(cfg.seed, Stream::Init, 0);
        let h = cfg.model.d_hidden;
        let mut mlp = Mlp {
            layers: vec![
                Linear {
                    w: Mat::glorot(g.feature_dim(), h, &mut rng),
                    b: Mat::zeros(1, h),
                },
                Linear {
                    w: Mat::glorot(h, 2, &mut rng),
                    b: Mat::zeros(1, 2),
                },
            ],
        };
        let mut states: Vec<AdamState> = mlp
            .layers
            .iter()
            .flat_map(|l| {
                [
                    AdamState::for_shape(l.w.rows(), l.w.cols()),
                    AdamState::for_shape(1, l.b.cols()),
                ]
            })
            .collect();
        let adam = Adam::new(cfg.lr, cfg.weight_decay);
        let mut model = Self {
            mlp: mlp.clone(),
            features,
            best_epoch: 0,
        };
        let mut best_auc = f64::NEG_INFINITY;

        for epoch in 0..cfg.epochs {
            let ids = epoch_ids(g, split, cfg, epoch)?;
            let batches = match cfg.mode {
                TrainMode::Fullbatch => vec![ids],
                TrainMode::Minibatch => make_batches(&ids, cfg.batch_size)?,
            };
            for b in &batches {
                let labels: Vec<usize> = b.iter().map(|&i| g.labels()[i] as usize).collect();
                let mut tape = Tape::new();
                let vars = bind(&mut tape, &mlp);
                let x = tape.leaf(model.features.select_rows(b));
                let logits = forward(&mut tape, &vars, x)?;
                let loss = tape.ce_with_logits(logits, &labels)?;
                tape.backward(loss)?;
                let mut st = states.iter_mut();
                for (l, v) in mlp.layers.iter_mut().zip(&vars.layers) {
                    adam.step(&mut l.w, tape.grad(v.w), st.next().expect("state"), true);
                    adam.step(&mut l.b, tape.grad(v.b), st.next().expect("state"), false);
                }
            }
            let auc = evaluate_mlp(&mlp, &model.features, g, &split.val)?.auc;
            if auc > best_auc {
                best_auc = auc;
                model.mlp = mlp.clone();
                model.best_epoch = epoch + 1;
            }
        }
        Ok(model)
    }

    pub fn evaluate(&self, g: &FraudGraph, ids: &[usize]) -> Result<MetricsReport> {
        evaluate_mlp(&self.mlp, &self.features, g, ids)
    }
}
