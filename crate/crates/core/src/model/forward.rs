use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::params::{Mlp, Params};
use crate::model::DignnParams;
use crate::ndcore::rng::{stream_rng, Stream};
use crate::ndcore::{Mat, SparseRows, Tape, Var};

/// Input to an MLP's first layer.
#[derive(Clone, Copy)]
enum Input<'a> {
    Dense(Var),
    Sparse(&'a SparseRows),
}

fn mlp_forward(tape: &mut Tape, mlp: &Mlp<Var>, input: Input<'_>) -> Result<Var> {
    let mut h: Option<Var> = None;
    for (i, layer) in mlp.layers.iter().enumerate() {
        let pre = match (h, input) {
            (Some(x), _) | (None, Input::Dense(x)) => tape.matmul(x, layer.w)?,
            (None, Input::Sparse(s)) => tape.sparse_matmul(s, layer.w)?,
        };
        let pre = tape.add_row(pre, layer.b)?;
        h = Some(if i + 1 < mlp.layers.len() { tape.relu(pre) } else { pre });
    }
    h.ok_or_else(|| Error::Contract("MLP without layers".into()))
}

/// Applies a decoder (or any dense-input MLP) to `z`.
pub(crate) fn decode(tape: &mut Tape, mlp: &Mlp<Var>, z: Var) -> Result<Var> {
    mlp_forward(tape, mlp, Input::Dense(z))
}

pub fn standard_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat {
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Mat::from_vec(rows, cols, data).expect("length matches")
}

/// Standard-normal draws for the two views of one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw {
    pub eps_a: Mat,
    pub eps_x: Mat,
}

impl NoiseDraw {
    pub fn sample<R: Rng + ?Sized>(rows: usize, d: usize, rng: &mut R) -> Self {
        let eps_a = standard_normal(rows, d, rng);
        let eps_x = standard_normal(rows, d, rng);
        Self { eps_a, eps_x }
    }

    pub fn zeros(rows: usize, d: usize) -> Self {
        Self {
            eps_a: Mat::zeros(rows, d),
            eps_x: Mat::zeros(rows, d),
        }
    }
}

/// `mu + sigma * eps` with `eps` standard normal drawn from `seed`.
pub fn reparameterize(mu: &Mat, sigma: f64, seed: u64) -> Result<Mat> {
    if !(sigma > 0.0) {
        return Err(Error::Config(format!("sigma must be > 0, got {sigma}")));
    }
    let mut rng = stream_rng(seed, Stream::Noise, 0);
    let eps = standard_normal(mu.rows(), mu.cols(), &mut rng);
    let mut out = mu.clone();
    for (o, e) in out.data_mut().iter_mut().zip(eps.data()) {
        *o += sigma * e;
    }
    Ok(out)
}

fn add_noise(tape: &mut Tape, mu: Var, eps: &Mat, sigma: f64) -> Result<Var> {
    let mut shift = eps.clone();
    shift.scale_assign(sigma);
    tape.add_const(mu, &shift)
}

pub(crate) fn check_inputs(params: &DignnParams, features: &Mat, topo: &SparseRows) -> Result<()> {
    if topo.cols() != params.num_nodes() {
        return Err(Error::Dimension {
            op: "encode_views (topology)",
            left: (topo.rows(), topo.cols()),
            right: params.enc_a.layers[0].w.shape(),
        });
    }
    if features.cols() != params.feature_dim() || features.rows() != topo.rows() {
        return Err(Error::Dimension {
            op: "encode_views (attributes)",
            left: features.shape(),
            right: params.enc_x.layers[0].w.shape(),
        });
    }
    Ok(())
}

/// View embeddings `(z_A, z_X)`.
pub fn encode_views_on_tape(tape: &mut Tape, pv: &Params<Var>, features: Var, topo: &SparseRows) -> Result<(Var, Var)> {
    let z_a = mlp_forward(tape, &pv.enc_a, Input::Sparse(topo))?;
    let z_x = mlp_forward(tape, &pv.enc_x, Input::Dense(features))?;
    Ok((z_a, z_x))
}

/// Attention weights (`n x 2`, columns topology/attribute) and fused embedding.
#[derive(Debug, Clone, Copy)]
pub struct FusionVars {
    pub scores: Var,
    pub alpha: Var,
    pub alpha_a: Var,
    pub alpha_x: Var,
    pub z: Var,
}

fn attention_score(tape: &mut Tape, pv: &Params<Var>, z: Var, attribute_view: bool) -> Result<Var> {
    let att = pv.attention_for(attribute_view);
    let h = tape.matmul(z, att.w)?;
    let h = tape.add_row(h, att.b)?;
    let h = tape.tanh(h);
    tape.matmul(h, att.q)
}

pub fn attention_fuse_on_tape(tape: &mut Tape, pv: &Params<Var>, z_a: Var, z_x: Var) -> Result<FusionVars> {
    let w_a = attention_score(tape, pv, z_a, false)?;
    let w_x = attention_score(tape, pv, z_x, true)?;
    let scores = tape.concat_cols(w_a, w_x)?;
    let alpha = tape.row_softmax(scores);
    let alpha_a = tape.column(alpha, 0)?;
    let alpha_x = tape.column(alpha, 1)?;
    let part_a = tape.mul_col(z_a, alpha_a)?;
    let part_x = tape.mul_col(z_x, alpha_x)?;
    let z = tape.add(part_a, part_x)?;
    Ok(FusionVars {
        scores,
        alpha,
        alpha_a,
        alpha_x,
        z,
    })
}

pub fn classify_on_tape(tape: &mut Tape, pv: &Params<Var>, z: Var) -> Result<Var> {
    let logits = tape.matmul(z, pv.classifier.w)?;
    tape.add_row(logits, pv.classifier.b)
}

/// Handles to everything one forward pass puts on the tape.
#[derive(Debug, Clone, Copy)]
pub struct ForwardVars {
    pub features: Var,
    /// Deterministic encoder means.
    pub z_a: Var,
    pub z_x: Var,
    /// Reparameterized samples (equal to the means when no noise is given).
    pub z_a_s: Var,
    pub z_x_s: Var,
    pub fusion: FusionVars,
    pub logits: Var,
    pub x_a_hat: Option<Var>,
    pub x_x_hat: Option<Var>,
}

/// Full forward pass. With `noise`, fusion, classifier and decoders consume
/// the sampled embeddings `mu + sigma * eps`; without it, the means.
pub fn forward_on_tape(
    tape: &mut Tape,
    pv: &Params<Var>,
    features: &Mat,
    topo: &SparseRows,
    noise: Option<(&NoiseDraw, f64)>,
    decoders: bool,
) -> Result<ForwardVars> {
    let fx = tape.leaf(features.clone());
    let (z_a, z_x) = encode_views_on_tape(tape, pv, fx, topo)?;
    let (z_a_s, z_x_s) = match noise {
        Some((draw, sigma)) => (
            add_noise(tape, z_a, &draw.eps_a, sigma)?,
            add_noise(tape, z_x, &draw.eps_x, sigma)?,
        ),
        None => (z_a, z_x),
    };
    let fusion = attention_fuse_on_tape(tape, pv, z_a_s, z_x_s)?;
    let logits = classify_on_tape(tape, pv, fusion.z)?;
    let (x_a_hat, x_x_hat) = if decoders {
        (
            Some(mlp_forward(tape, &pv.dec_a, Input::Dense(z_a_s))?),
            Some(mlp_forward(tape, &pv.dec_x, Input::Dense(z_x_s))?),
        )
    } else {
        (None, None)
    };
    Ok(ForwardVars {
        features: fx,
        z_a,
        z_x,
        z_a_s,
        z_x_s,
        fusion,
        logits,
        x_a_hat,
        x_x_hat,
    })
}

/// Materialized forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOut {
    pub z_a: Mat,
    pub z_x: Mat,
    pub z_a_s: Mat,
    pub z_x_s: Mat,
    pub alpha_a: Mat,
    pub alpha_x: Mat,
    pub z: Mat,
    pub logits: Mat,
    pub x_a_hat: Mat,
    pub x_x_hat: Mat,
}

impl ForwardOut {
    pub(crate) fn collect(tape: &Tape, v: &ForwardVars) -> Self {
        let opt = |x: Option<Var>| x.map_or_else(|| Mat::zeros(0, 0), |x| tape.value(x).clone());
        Self {
            z_a: tape.value(v.z_a).clone(),
            z_x: tape.value(v.z_x).clone(),
            z_a_s: tape.value(v.z_a_s).clone(),
            z_x_s: tape.value(v.z_x_s).clone(),
            alpha_a: tape.value(v.fusion.alpha_a).clone(),
            alpha_x: tape.value(v.fusion.alpha_x).clone(),
            z: tape.value(v.fusion.z).clone(),
            logits: tape.value(v.logits).clone(),
            x_a_hat: opt(v.x_a_hat),
            x_x_hat: opt(v.x_x_hat),
        }
    }
}

/// Forward pass with optional reparameterization noise.
pub fn forward(
    params: &DignnParams,
    features: &Mat,
    topo: &SparseRows,
    noise: Option<(&NoiseDraw, f64)>,
) -> Result<ForwardOut> {
    check_inputs(params, features, topo)?;
    let mut tape = Tape::new();
    let pv = params.bind(&mut tape);
    let vars = forward_on_tape(&mut tape, &pv, features, topo, noise, true)?;
    Ok(ForwardOut::collect(&tape, &vars))
}

pub fn encode_views(params: &DignnParams, features: &Mat, topo: &SparseRows) -> Result<(Mat, Mat)> {
    check_inputs(params, features, topo)?;
    let mut tape = Tape::new();
    let pv = params.bind(&mut tape);
    let fx = tape.leaf(features.clone());
    let (a, x) = encode_views_on_tape(&mut tape, &pv, fx, topo)?;
    Ok((tape.value(a).clone(), tape.value(x).clone()))
}

/// `(alpha_A, alpha_X, z)` for given view embeddings.
pub fn attention_fuse(params: &DignnParams, z_a: &Mat, z_x: &Mat) -> Result<(Mat, Mat, Mat)> {
    let mut tape = Tape::new();
    let pv = params.bind(&mut tape);
    let (a, x) = (tape.leaf(z_a.clone()), tape.leaf(z_x.clone()));
    let f = attention_fuse_on_tape(&mut tape, &pv, a, x)?;
    Ok((
        tape.value(f.alpha_a).clone(),
        tape.value(f.alpha_x).clone(),
        tape.value(f.z).clone(),
    ))
}

pub fn classify(params: &DignnParams, z: &Mat) -> Result<Mat> {
    let mut tape = Tape::new();
    let pv = params.bind(&mut tape);
    let zv = tape.leaf(z.clone());
    let l = classify_on_tape(&mut tape, &pv, zv)?;
    Ok(tape.value(l).clone())
}

/// Argmax classes (ties go to class 0) and softmax fraud probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub classes: Vec<usize>,
    pub scores: Vec<f64>,
}

impl Prediction {
    pub fn from_logits(logits: &Mat) -> Self {
        let mut classes = Vec::with_capacity(logits.rows());
        let mut scores = Vec::with_capacity(logits.rows());
        for r in 0..logits.rows() {
            let (l0, l1) = (logits.get(r, 0), logits.get(r, 1));
            classes.push(usize::from(l1 > l0));
            // softmax over two logits
            scores.push(1.0 / (1.0 + (l0 - l1).exp()));
        }
        Self { classes, scores }
    }
}

/// Deterministic (noise-free) prediction.
pub fn predict(params: &DignnParams, features: &Mat, topo: &SparseRows) -> Result<Prediction> {
    let (logits, _, _) = deterministic(params, features, topo)?;
    Ok(Prediction::from_logits(&logits))
}

/// Deterministic logits, attention weights (`n x 2`) and fused embeddings.
pub fn deterministic(params: &DignnParams, features: &Mat, topo: &SparseRows) -> Result<(Mat, Mat, Mat)> {
    check_inputs(params, features, topo)?;
    let mut tape = Tape::new();
    let pv = params.bind(&mut tape);
    let v = forward_on_tape(&mut tape, &pv, features, topo, None, false)?;
    Ok((
        tape.value(v.logits).clone(),
        tape.value(v.fusion.alpha).clone(),
        tape.value(v.fusion.z).clone(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DignnConfig;

    fn toy_params(d: usize) -> DignnParams {
        let cfg = DignnConfig {
            d,
            d_hidden: 4,
            ..Default::default()
        };
        DignnParams::init(&cfg, 5, 3, &mut stream_rng(3, Stream::Init, 0))
    }

    #[test]
    fn identical_views_split_attention_evenly() {
        let p = toy_params(2);
        let z = Mat::from_rows(&[&[0.3, -1.2], &[2.0, 0.5]]);
        let (a, x, fused) = attention_fuse(&p, &z, &z).unwrap();
        for r in 0..2 {
            assert!((a.get(r, 0) - 0.5).abs() < 1e-15 && (x.get(r, 0) - 0.5).abs() < 1e-15);
        }
        assert!(fused.max_abs_diff(&z) < 1e-15);
    }

    #[test]
    fn score_gap_of_ln3_gives_three_quarters() {
        // d = 1, W = 1, b = 0, q = 4: score = 4 tanh(z), so choose z = atanh(s / 4)
        let mut p = toy_params(1);
        p.attention[0].w = Mat::scalar(1.0);
        p.attention[0].b = Mat::scalar(0.0);
        p.attention[0].q = Mat::scalar(4.0);
        let s_x = 0.1_f64 / 4.0;
        let s_a = s_x + 3f64.ln() / 4.0;
        let (a, x, _) = attention_fuse(&p, &Mat::scalar(s_a.atanh()), &Mat::scalar(s_x.atanh())).unwrap();
        assert!((a.item().unwrap() - 0.75).abs() < 1e-12, "{}", a.item().unwrap());
        assert!((x.item().unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn zero_query_ignores_inputs() {
        let mut p = toy_params(2);
        p.attention[0].q = Mat::zeros(2, 1);
        let za = Mat::from_rows(&[&[5.0, -3.0]]);
        let zx = Mat::from_rows(&[&[-1.0, 8.0]]);
        let (a, x, z) = attention_fuse(&p, &za, &zx).unwrap();
        assert_eq!((a.item().unwrap(), x.item().unwrap()), (0.5, 0.5));
        assert_eq!(z.row(0), &[2.0, 2.5]);
    }

    #[test]
    fn classifier_bias_broadcasts_with_zero_weights() {
        let mut p = toy_params(2);
        p.classifier.w = Mat::zeros(2, 2);
        let z = Mat::from_rows(&[&[1.0, 2.0], &[-4.0, 0.0]]);
        let logits = classify(&p, &z).unwrap();
        assert!(logits.data().iter().all(|&v| v == 0.0));
        assert_eq!(Prediction::from_logits(&logits).scores, &[0.5, 0.5]);
        p.classifier.b = Mat::from_rows(&[&[0.0, 10.0]]);
        let pred = Prediction::from_logits(&classify(&p, &z).unwrap());
        assert_eq!(pred.classes, &[1, 1]);
    }

    #[test]
    fn prediction_ties_go_to_benign() {
        let pred = Prediction::from_logits(&Mat::from_rows(&[&[0.0, 0.0], &[0.0, 10.0]]));
        assert_eq!(pred.classes, &[0, 1]);
        assert_eq!(pred.scores[0], 0.5);
        assert!(pred.scores[1] > 0.9999);
    }

    #[test]
    fn reparameterize_moments() {
        let mu = Mat::filled(200, 50, 1.5);
        let z = reparameterize(&mu, 2.0, 11).unwrap();
        let n = z.data().len() as f64;
        let mean = z.data().iter().sum::<f64>() / n;
        let var = z.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!((mean - 1.5).abs() < 0.05, "{mean}");
        assert!((var - 4.0).abs() < 0.15, "{var}");
        assert_eq!(reparameterize(&mu, 2.0, 11).unwrap(), z);
        assert!(reparameterize(&mu, 0.0, 11).is_err());
    }

    #[test]
    fn dimension_errors() {
        let p = toy_params(2);
        let topo = SparseRows::identity(5);
        assert!(encode_views(&p, &Mat::zeros(5, 3), &topo).is_ok());
        assert!(encode_views(&p, &Mat::zeros(5, 4), &topo).is_err());
        assert!(encode_views(&p, &Mat::zeros(5, 3), &SparseRows::identity(6)).is_err());
    }
}
