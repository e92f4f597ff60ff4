//! Loop-based reference implementations shared by the integration tests.
//! Nothing here goes through the tape or the library's matrix kernels.
#![allow(dead_code)]

use dignn::graphdata::{stratified_split, synth_generate, FraudGraph, SplitIndex, SplitRatios, SynthConfig};
use dignn::model::{DignnParams, Mlp};
use dignn::ndcore::{Mat, SparseRows};

pub type Rows = Vec<Vec<f64>>;

pub fn rows(m: &Mat) -> Rows {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

pub fn dense(s: &SparseRows) -> Rows {
    let mut out = vec![vec![0.0; s.cols()]; s.rows()];
    for (r, row) in out.iter_mut().enumerate() {
        for (&c, &v) in s.row_cols(r).iter().zip(s.row_values(r)) {
            row[c] += v;
        }
    }
    out
}

pub fn matmul(a: &Rows, b: &Rows) -> Rows {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|ar| {
            assert_eq!(ar.len(), inner);
            (0..cols).map(|j| (0..inner).map(|k| ar[k] * b[k][j]).sum()).collect()
        })
        .collect()
}

pub fn add_bias(a: &Rows, b: &Mat) -> Rows {
    a.iter()
        .map(|r| r.iter().enumerate().map(|(j, v)| v + b.get(0, j)).collect())
        .collect()
}

pub fn mlp(net: &Mlp<Mat>, x: &Rows) -> Rows {
    let mut h = x.clone();
    for (i, l) in net.layers.iter().enumerate() {
        h = add_bias(&matmul(&h, &rows(&l.w)), &l.b);
        if i + 1 < net.layers.len() {
            for v in h.iter_mut().flatten() {
                *v = v.max(0.0);
            }
        }
    }
    h
}

/// Attention scores `q . tanh(z W + b)` per row.
pub fn scores(p: &DignnParams, z: &Rows, attribute_view: bool) -> Vec<f64> {
    let att = p.attention_for(attribute_view);
    let h = add_bias(&matmul(z, &rows(&att.w)), &att.b);
    h.iter()
        .map(|r| r.iter().enumerate().map(|(j, v)| v.tanh() * att.q.get(j, 0)).sum())
        .collect()
}

pub struct OracleForward {
    pub z_a: Rows,
    pub z_x: Rows,
    pub alpha_a: Vec<f64>,
    pub alpha_x: Vec<f64>,
    pub z: Rows,
    pub logits: Rows,
}

/// Noise-free forward.
pub fn forward(p: &DignnParams, features: &Mat, topo: &SparseRows) -> OracleForward {
    let z_a = mlp(&p.enc_a, &dense(topo));
    let z_x = mlp(&p.enc_x, &rows(features));
    fuse(p, z_a, z_x)
}

pub fn fuse(p: &DignnParams, z_a: Rows, z_x: Rows) -> OracleForward {
    let sa = scores(p, &z_a, false);
    let sx = scores(p, &z_x, true);
    let mut alpha_a = Vec::new();
    let mut alpha_x = Vec::new();
    let mut z = Vec::new();
    for i in 0..z_a.len() {
        let m = sa[i].max(sx[i]);
        let (ea, ex) = ((sa[i] - m).exp(), (sx[i] - m).exp());
        let (a, x) = (ea / (ea + ex), ex / (ea + ex));
        alpha_a.push(a);
        alpha_x.push(x);
        z.push(z_a[i].iter().zip(&z_x[i]).map(|(u, v)| a * u + x * v).collect());
    }
    let logits = add_bias(&matmul(&z, &rows(&p.classifier.w)), &p.classifier.b);
    OracleForward {
        z_a,
        z_x,
        alpha_a,
        alpha_x,
        z,
        logits,
    }
}

pub fn mse(a: &Rows, b: &Rows) -> f64 {
    let mut s = 0.0;
    let mut n = 0usize;
    for (ra, rb) in a.iter().zip(b) {
        for (x, y) in ra.iter().zip(rb) {
            s += (x - y) * (x - y);
            n += 1;
        }
    }
    s / n as f64
}

/// Mean binary cross-entropy of two-logit rows.
pub fn cross_entropy(logits: &Rows, labels: &[usize]) -> f64 {
    let mut s = 0.0;
    for (l, &y) in logits.iter().zip(labels) {
        let m = l[0].max(l[1]);
        let lse = m + ((l[0] - m).exp() + (l[1] - m).exp()).ln();
        s += lse - l[y];
    }
    s / labels.len() as f64
}

pub fn max_abs_diff(a: &Rows, b: &Mat) -> f64 {
    assert_eq!((a.len(), a.first().map_or(0, Vec::len)), b.shape());
    let mut m = 0.0f64;
    for (r, row) in a.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            m = m.max((v - b.get(r, c)).abs());
        }
    }
    m
}

/// `Phi^{-1}(0.95) * sqrt(2)`: class-mean distance whose Bayes-optimal
/// attribute AUC is 0.95 for unit-variance Gaussians.
pub fn separation_for_auc(auc: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(auc) * 2f64.sqrt()
}

/// A small normalized synthetic graph and its split.
pub fn small_graph(n: usize, seed: u64) -> (FraudGraph, SplitIndex) {
    let g = synth_generate(&SynthConfig {
        num_nodes: n,
        fraud_rate: 0.3,
        avg_degree: 6.0,
        seed,
        ..Default::default()
    })
    .unwrap();
    let split = stratified_split(&g, SplitRatios::default(), seed).unwrap();
    let g = dignn::graphdata::normalize_features(&g, &split).unwrap();
    (g, split)
}
