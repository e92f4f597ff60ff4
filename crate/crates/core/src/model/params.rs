use rand::Rng;

use crate::model::DignnConfig;
use crate::ndcore::{Mat, Tape, Var};

/// Weight matrix (`in x out`) and bias row (`1 x out`).
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub w: T,
    pub b: T,
}

/// Stack of linear layers with relu between them (none after the last).
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub layers: Vec<Linear<T>>,
}

/// Attention scorer `q . tanh(z W + b)`, with `q: d x 1`, `W: d x d`, `b: 1 x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams<T> {
    pub q: T,
    pub w: T,
    pub b: T,
}

/// Every trainable tensor of the model. `T` is `Mat` for stored weights and
/// gradients, `Var` once registered on a tape.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub enc_a: Mlp<T>,
    pub enc_x: Mlp<T>,
    /// One shared entry, or `[topology, attribute]` when per-view.
    pub attention: Vec<AttentionParams<T>>,
    pub classifier: Linear<T>,
    pub dec_a: Mlp<T>,
    pub dec_x: Mlp<T>,
}

pub type DignnParams = Params<Mat>;

/// Whether a tensor is a bias (excluded from weight decay).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorKind {
    Weight,
    Bias,
}

impl<T> Mlp<T> {
    fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> Mlp<U> {
        Mlp {
            layers: self.layers.iter().map(|l| Linear { w: f(&l.w), b: f(&l.b) }).collect(),
        }
    }
}

fn mlp_entries<'a, T>(prefix: &str, mlp: &'a Mlp<T>, out: &mut Vec<(String, TensorKind, &'a T)>) {
    for (i, l) in mlp.layers.iter().enumerate() {
        out.push((format!("{prefix}.{i}.w"), TensorKind::Weight, &l.w));
        out.push((format!("{prefix}.{i}.b"), TensorKind::Bias, &l.b));
    }
}

fn attention_prefix(count: usize, i: usize) -> &'static str {
    match (count, i) {
        (1, _) => "att",
        (_, 0) => "att_a",
        _ => "att_x",
    }
}

impl<T> Params<T> {
    /// All tensors with stable names, in the canonical serialization order.
    pub fn entries(&self) -> Vec<(String, TensorKind, &T)> {
        let mut out = Vec::new();
        mlp_entries("enc_a", &self.enc_a, &mut out);
        mlp_entries("enc_x", &self.enc_x, &mut out);
        let n = self.attention.len();
        for (i, a) in self.attention.iter().enumerate() {
            let p = attention_prefix(n, i);
            out.push((format!("{p}.q"), TensorKind::Weight, &a.q));
            out.push((format!("{p}.w"), TensorKind::Weight, &a.w));
            out.push((format!("{p}.b"), TensorKind::Bias, &a.b));
        }
        out.push(("cls.w".into(), TensorKind::Weight, &self.classifier.w));
        out.push(("cls.b".into(), TensorKind::Bias, &self.classifier.b));
        mlp_entries("dec_a", &self.dec_a, &mut out);
        mlp_entries("dec_x", &self.dec_x, &mut out);
        out
    }

    /// Mutable tensors in the same order as [`Params::entries`].
    pub fn tensors_mut(&mut self) -> Vec<&mut T> {
        let mut out = Vec::new();
        for l in self.enc_a.layers.iter_mut().chain(self.enc_x.layers.iter_mut()) {
            out.push(&mut l.w);
            out.push(&mut l.b);
        }
        for a in self.attention.iter_mut() {
            out.push(&mut a.q);
            out.push(&mut a.w);
            out.push(&mut a.b);
        }
        out.push(&mut self.classifier.w);
        out.push(&mut self.classifier.b);
        for l in self.dec_a.layers.iter_mut().chain(self.dec_x.layers.iter_mut()) {
            out.push(&mut l.w);
            out.push(&mut l.b);
        }
        out
    }

    /// Rebuilds the same structure with every tensor mapped through `f`, in
    /// canonical order.
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> Params<U> {
        let enc_a = self.enc_a.map(&mut f);
        let enc_x = self.enc_x.map(&mut f);
        let attention = self
            .attention
            .iter()
            .map(|a| AttentionParams {
                q: f(&a.q),
                w: f(&a.w),
                b: f(&a.b),
            })
            .collect();
        let classifier = Linear {
            w: f(&self.classifier.w),
            b: f(&self.classifier.b),
        };
        let dec_a = self.dec_a.map(&mut f);
        let dec_x = self.dec_x.map(&mut f);
        Params {
            enc_a,
            enc_x,
            attention,
            classifier,
            dec_a,
            dec_x,
        }
    }

    /// Attention parameters used for the topology / attribute view.
    pub fn attention_for(&self, attribute_view: bool) -> &AttentionParams<T> {
        if attribute_view && self.attention.len() > 1 {
            &self.attention[1]
        } else {
            &self.attention[0]
        }
    }
}

fn mlp_build(dims: &[usize], weight: &mut impl FnMut(usize, usize) -> Mat) -> Mlp<Mat> {
    Mlp {
        layers: dims
            .windows(2)
            .map(|w| Linear {
                w: weight(w[0], w[1]),
                b: Mat::zeros(1, w[1]),
            })
            .collect(),
    }
}

/// Layer widths `input -> hidden... -> output` for `layers` linear maps.
fn widths(input: usize, hidden: usize, output: usize, layers: usize) -> Vec<usize> {
    let mut w = vec![input];
    w.extend(std::iter::repeat_n(hidden, layers - 1));
    w.push(output);
    w
}

/// Dimensions that fix the shape of every tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelShape {
    pub num_nodes: usize,
    pub feature_dim: usize,
    pub d: usize,
    pub d_hidden: usize,
    pub layers: usize,
    pub per_view_attention: bool,
}

impl ModelShape {
    pub fn new(cfg: &DignnConfig, num_nodes: usize, feature_dim: usize) -> Self {
        Self {
            num_nodes,
            feature_dim,
            d: cfg.d,
            d_hidden: cfg.d_hidden,
            layers: cfg.encoder_layers,
            per_view_attention: cfg.per_view_attention,
        }
    }
}

impl DignnParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(cfg: &DignnConfig, num_nodes: usize, feature_dim: usize, rng: &mut R) -> Self {
        Self::build(ModelShape::new(cfg, num_nodes, feature_dim), &mut |r, c| {
            Mat::glorot(r, c, rng)
        })
    }

    /// All-zero tensors of the given shape.
    pub fn zeros(shape: ModelShape) -> Self {
        Self::build(shape, &mut Mat::zeros)
    }

    fn build(s: ModelShape, weight: &mut impl FnMut(usize, usize) -> Mat) -> Self {
        let (d, h, l) = (s.d, s.d_hidden, s.layers.max(1));
        let enc_a = mlp_build(&widths(s.num_nodes, h, d, l), weight);
        let enc_x = mlp_build(&widths(s.feature_dim, h, d, l), weight);
        let views = if s.per_view_attention { 2 } else { 1 };
        let attention = (0..views)
            .map(|_| AttentionParams {
                q: weight(d, 1),
                w: weight(d, d),
                b: Mat::zeros(1, d),
            })
            .collect();
        let classifier = Linear {
            w: weight(d, 2),
            b: Mat::zeros(1, 2),
        };
        let dec_a = mlp_build(&widths(d, h, s.num_nodes, l), weight);
        let dec_x = mlp_build(&widths(d, h, s.feature_dim, l), weight);
        Self {
            enc_a,
            enc_x,
            attention,
            classifier,
            dec_a,
            dec_x,
        }
    }

    pub fn shape(&self) -> ModelShape {
        ModelShape {
            num_nodes: self.num_nodes(),
            feature_dim: self.feature_dim(),
            d: self.embedding_dim(),
            d_hidden: self.hidden_dim(),
            layers: self.enc_a.layers.len(),
            per_view_attention: self.attention.len() > 1,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.enc_a.layers[0].w.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.enc_x.layers[0].w.rows()
    }

    pub fn embedding_dim(&self) -> usize {
        self.classifier.w.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.enc_x.layers[0].w.cols()
    }

    pub fn zeros_like(&self) -> Self {
        self.map(|m| Mat::zeros(m.rows(), m.cols()))
    }

    pub fn num_scalars(&self) -> usize {
        self.entries().iter().map(|(_, _, m)| m.data().len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|(_, _, m)| m.is_finite())
    }

    /// Registers every tensor as a tape leaf.
    pub fn bind(&self, tape: &mut Tape) -> Params<Var> {
        self.map(|m| tape.leaf(m.clone()))
    }

    /// Reads gradients of bound leaves back into a parameter-shaped struct.
    pub fn grads_from(tape: &Tape, vars: &Params<Var>) -> Self {
        vars.map(|&v| tape.grad(v).clone())
    }
}
