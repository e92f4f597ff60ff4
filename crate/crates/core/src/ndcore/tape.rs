//! Define-by-run reverse-mode differentiation over matrices.
//!
//! A [`Tape`] is built fresh for every forward pass. Each operation pushes a
//! node holding its value and a record of how it was produced; [`Tape::backward`]
//! walks the nodes in reverse and accumulates `d loss / d value` into every
//! node's gradient slot.

use crate::error::{Error, Result};
use crate::ndcore::mat::{gemm_nt, gemm_tn};
use crate::ndcore::{Mat, SparseRows};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Sigmoid,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    /// Derivative expressed through input `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    SparseMatMul(SparseRows, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Shift(Var),
    Scale(Var, f64),
    Unary(Var, Activation),
    RowSoftmax(Var),
    ConcatCols(Var, Var),
    Column(Var, usize),
    MulCol(Var, Var),
    SumSquares(Var),
    Sum(Var),
    CrossEntropy(Var, Vec<usize>),
    Mse(Var, Mat),
}

#[derive(Debug)]
struct Node {
    value: Mat,
    grad: Mat,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn dim_err(op: &'static str, a: &Mat, b: &Mat) -> Error {
    Error::Dimension {
        op,
        left: a.shape(),
        right: b.shape(),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Mat, op: Op) -> Var {
        let (r, c) = value.shape();
        self.nodes.push(Node {
            value,
            grad: Mat::zeros(r, c),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    /// Registers an input (parameter or data).
    pub fn leaf(&mut self, value: Mat) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> &Mat {
        &self.nodes[v.0].grad
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad.scale_assign(0.0);
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    /// Sparse constant times dense variable; only `b` receives gradient.
    pub fn sparse_matmul(&mut self, s: &SparseRows, b: Var) -> Result<Var> {
        let value = s.matmul_dense(self.value(b))?;
        Ok(self.push(value, Op::SparseMatMul(s.clone(), b)))
    }

    /// Adds a `1 x cols` row vector to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (av, rv) = (self.value(a), self.value(row));
        if rv.rows() != 1 || rv.cols() != av.cols() {
            return Err(dim_err("add_row", av, rv));
        }
        let mut value = av.clone();
        for r in 0..value.rows() {
            for (x, &b) in value.row_mut(r).iter_mut().zip(rv.data()) {
                *x += b;
            }
        }
        Ok(self.push(value, Op::AddRow(a, row)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(dim_err("add", av, bv));
        }
        let mut value = av.clone();
        value.add_assign(bv);
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(dim_err("sub", av, bv));
        }
        let mut value = av.clone();
        for (x, &y) in value.data_mut().iter_mut().zip(bv.data()) {
            *x -= y;
        }
        Ok(self.push(value, Op::Sub(a, b)))
    }

    /// `a + c` for a constant `c` of the same shape.
    pub fn add_const(&mut self, a: Var, c: &Mat) -> Result<Var> {
        let av = self.value(a);
        if av.shape() != c.shape() {
            return Err(dim_err("add_const", av, c));
        }
        let mut value = av.clone();
        value.add_assign(c);
        Ok(self.push(value, Op::Shift(a)))
    }

    /// `a + c` for a scalar constant `c`.
    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let mut value = self.value(a).clone();
        value.data_mut().iter_mut().for_each(|x| *x += c);
        self.push(value, Op::Shift(a))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let mut value = self.value(a).clone();
        value.scale_assign(s);
        self.push(value, Op::Scale(a, s))
    }

    pub fn elementwise(&mut self, a: Var, kind: Activation) -> Var {
        let mut value = self.value(a).clone();
        value.data_mut().iter_mut().for_each(|x| *x = kind.apply(*x));
        self.push(value, Op::Unary(a, kind))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.elementwise(a, Activation::Tanh)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.elementwise(a, Activation::Relu)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.elementwise(a, Activation::Sigmoid)
    }

    /// Softmax across each row, shifted by the row max.
    pub fn row_softmax(&mut self, a: Var) -> Var {
        let mut value = self.value(a).clone();
        for r in 0..value.rows() {
            softmax_in_place(value.row_mut(r));
        }
        self.push(value, Op::RowSoftmax(a))
    }

    /// `[a | b]` side by side.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rows() != bv.rows() {
            return Err(dim_err("concat_cols", av, bv));
        }
        let cols = av.cols() + bv.cols();
        let mut data = Vec::with_capacity(av.rows() * cols);
        for r in 0..av.rows() {
            data.extend_from_slice(av.row(r));
            data.extend_from_slice(bv.row(r));
        }
        let value = Mat::from_vec(av.rows(), cols, data)?;
        Ok(self.push(value, Op::ConcatCols(a, b)))
    }

    /// Column `j` of `a` as an `n x 1` matrix.
    pub fn column(&mut self, a: Var, j: usize) -> Result<Var> {
        let av = self.value(a);
        if j >= av.cols() {
            return Err(Error::Contract(format!("column {j} of a {:?} matrix", av.shape())));
        }
        let data = (0..av.rows()).map(|r| av.get(r, j)).collect();
        let value = Mat::from_vec(av.rows(), 1, data)?;
        Ok(self.push(value, Op::Column(a, j)))
    }

    /// Scales row `i` of `a` by `c[i]` where `c` is `n x 1`.
    pub fn mul_col(&mut self, a: Var, c: Var) -> Result<Var> {
        let (av, cv) = (self.value(a), self.value(c));
        if cv.cols() != 1 || cv.rows() != av.rows() {
            return Err(dim_err("mul_col", av, cv));
        }
        let mut value = av.clone();
        for r in 0..value.rows() {
            let s = cv.get(r, 0);
            value.row_mut(r).iter_mut().for_each(|x| *x *= s);
        }
        Ok(self.push(value, Op::MulCol(a, c)))
    }

    /// Sum of squared entries, as a 1x1.
    pub fn sum_squares(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().map(|x| x * x).sum();
        self.push(Mat::scalar(s), Op::SumSquares(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push(Mat::scalar(s), Op::Sum(a))
    }

    /// Mean negative log-likelihood of `labels` under row-softmax of `logits`.
    pub fn ce_with_logits(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let lv = self.value(logits);
        if lv.rows() != labels.len() {
            return Err(Error::Dimension {
                op: "ce_with_logits",
                left: lv.shape(),
                right: (labels.len(), 1),
            });
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &y)| y > 1 || y >= lv.cols()) {
            return Err(Error::InvalidLabel {
                index,
                label: label as i64,
            });
        }
        if labels.is_empty() {
            return Err(Error::Contract("cross-entropy over an empty batch".into()));
        }
        let mut total = 0.0;
        for (r, &y) in labels.iter().enumerate() {
            let row = lv.row(r);
            total += log_sum_exp(row) - row[y];
        }
        let value = Mat::scalar(total / labels.len() as f64);
        Ok(self.push(value, Op::CrossEntropy(logits, labels.to_vec())))
    }

    /// Mean over all entries of `(pred - target)^2`.
    pub fn mse(&mut self, pred: Var, target: &Mat) -> Result<Var> {
        let pv = self.value(pred);
        if pv.shape() != target.shape() {
            return Err(dim_err("mse", pv, target));
        }
        let n = pv.data().len().max(1) as f64;
        let s: f64 = pv
            .data()
            .iter()
            .zip(target.data())
            .map(|(p, t)| (p - t) * (p - t))
            .sum();
        Ok(self.push(Mat::scalar(s / n), Op::Mse(pred, target.clone())))
    }

    /// Accumulates `d loss / d value` into every node reachable from `loss`.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).shape() != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut adj: Vec<Option<Mat>> = (0..=loss.0).map(|_| None).collect();
        adj[loss.0] = Some(Mat::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            self.propagate(i, &g, &mut adj);
            self.nodes[i].grad.add_assign(&g);
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &Mat, adj: &mut [Option<Mat>]) {
        let node = &self.nodes[i];
        macro_rules! acc {
            ($v:expr) => {
                slot(&self.nodes, adj, $v)
            };
        }
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                gemm_nt(g, bv, acc!(*a));
                gemm_tn(av, g, acc!(*b));
            }
            Op::SparseMatMul(s, b) => s.accumulate_transpose_product(g, acc!(*b)),
            Op::AddRow(a, row) => {
                acc!(*a).add_assign(g);
                let rg = acc!(*row);
                for r in 0..g.rows() {
                    for (o, &x) in rg.data_mut().iter_mut().zip(g.row(r)) {
                        *o += x;
                    }
                }
            }
            Op::Add(a, b) => {
                acc!(*a).add_assign(g);
                acc!(*b).add_assign(g);
            }
            Op::Sub(a, b) => {
                acc!(*a).add_assign(g);
                let bg = acc!(*b);
                for (o, &x) in bg.data_mut().iter_mut().zip(g.data()) {
                    *o -= x;
                }
            }
            Op::Shift(a) => acc!(*a).add_assign(g),
            Op::Scale(a, s) => {
                let ag = acc!(*a);
                for (o, &x) in ag.data_mut().iter_mut().zip(g.data()) {
                    *o += s * x;
                }
            }
            Op::Unary(a, kind) => {
                let xv = &self.nodes[a.0].value;
                let ag = acc!(*a);
                for (((o, &gx), &x), &y) in ag
                    .data_mut()
                    .iter_mut()
                    .zip(g.data())
                    .zip(xv.data())
                    .zip(node.value.data())
                {
                    *o += gx * kind.derivative(x, y);
                }
            }
            Op::RowSoftmax(a) => {
                let y = &node.value;
                let ag = acc!(*a);
                for r in 0..y.rows() {
                    let (yr, gr) = (y.row(r), g.row(r));
                    let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                    for ((o, &yy), &gg) in ag.row_mut(r).iter_mut().zip(yr).zip(gr) {
                        *o += yy * (gg - dot);
                    }
                }
            }
            Op::ConcatCols(a, b) => {
                let ac = self.nodes[a.0].value.cols();
                let ag = acc!(*a);
                for r in 0..g.rows() {
                    for (o, &x) in ag.row_mut(r).iter_mut().zip(&g.row(r)[..ac]) {
                        *o += x;
                    }
                }
                let bg = acc!(*b);
                for r in 0..g.rows() {
                    for (o, &x) in bg.row_mut(r).iter_mut().zip(&g.row(r)[ac..]) {
                        *o += x;
                    }
                }
            }
            Op::Column(a, j) => {
                let ag = acc!(*a);
                for r in 0..g.rows() {
                    let cur = ag.get(r, *j);
                    ag.set(r, *j, cur + g.get(r, 0));
                }
            }
            Op::MulCol(a, c) => {
                let (av, cv) = (&self.nodes[a.0].value, &self.nodes[c.0].value);
                let ag = acc!(*a);
                for r in 0..g.rows() {
                    let s = cv.get(r, 0);
                    for (o, &x) in ag.row_mut(r).iter_mut().zip(g.row(r)) {
                        *o += s * x;
                    }
                }
                let cg = acc!(*c);
                for r in 0..g.rows() {
                    let dot: f64 = av.row(r).iter().zip(g.row(r)).map(|(p, q)| p * q).sum();
                    let cur = cg.get(r, 0);
                    cg.set(r, 0, cur + dot);
                }
            }
            Op::SumSquares(a) => {
                let s = g.data()[0];
                let xv = &self.nodes[a.0].value;
                let ag = acc!(*a);
                for (o, &x) in ag.data_mut().iter_mut().zip(xv.data()) {
                    *o += 2.0 * x * s;
                }
            }
            Op::Sum(a) => {
                let s = g.data()[0];
                acc!(*a).data_mut().iter_mut().for_each(|o| *o += s);
            }
            Op::CrossEntropy(logits, labels) => {
                let s = g.data()[0] / labels.len() as f64;
                let lv = &self.nodes[logits.0].value;
                let lg = acc!(*logits);
                let mut p = vec![0.0; lv.cols()];
                for (r, &y) in labels.iter().enumerate() {
                    p.copy_from_slice(lv.row(r));
                    softmax_in_place(&mut p);
                    p[y] -= 1.0;
                    for (o, &q) in lg.row_mut(r).iter_mut().zip(&p) {
                        *o += s * q;
                    }
                }
            }
            Op::Mse(pred, target) => {
                let pv = &self.nodes[pred.0].value;
                let s = 2.0 * g.data()[0] / pv.data().len().max(1) as f64;
                let pg = acc!(*pred);
                for ((o, &p), &t) in pg.data_mut().iter_mut().zip(pv.data()).zip(target.data()) {
                    *o += s * (p - t);
                }
            }
        }
    }
}

fn slot<'a>(nodes: &[Node], adj: &'a mut [Option<Mat>], v: Var) -> &'a mut Mat {
    let (r, c) = nodes[v.0].value.shape();
    adj[v.0].get_or_insert_with(|| Mat::zeros(r, c))
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub(crate) fn softmax_in_place(xs: &mut [f64]) {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - m).exp();
        z += *x;
    }
    for x in xs.iter_mut() {
        *x /= z;
    }
}
