//! Define-by-run reverse-mode differentiation.
//!
//! A [`Tape`] records every operation of one forward pass in execution order.
//! Because nodes are appended as they are computed, the node list is already a
//! topological order and [`Tape::backward`] is a single reverse sweep.

use rand::Rng as _;

use super::tensor::{gemm, MatRef, Tensor};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Lower bound applied inside logarithms of the Bernoulli divergence gradient.
pub const KL_LOG_FLOOR: f64 = 1e-12;

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    MulRow(Var, Var),
    Row(Var, usize),
    RowNormalize(Var),
    Ln(Var),
    Exp(Var),
    Relu(Var),
    Cosine {
        a: Var,
        b: Var,
        a_hat: Tensor,
        b_hat: Tensor,
        a_norm: Vec<f64>,
        b_norm: Vec<f64>,
    },
    Mask(Var, Vec<bool>),
    Clamp(Var, f64, f64),
    SoftmaxCrossEntropy {
        logits: Var,
        probs: Tensor,
        labels: Vec<usize>,
        rows: Vec<bool>,
    },
    Sum(Var),
    Mean(Var),
    BernoulliKlMean(Var),
    Dropout(Var, Vec<f64>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Recorded computation for one forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every node that requires them.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, or zeros of `like`'s shape when nothing flowed into it.
    pub fn get_or_zeros(&self, v: Var, like: &Tensor) -> Tensor {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(like.rows(), like.cols()))
    }
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::ShapeMismatch {
        op,
        detail: format!(
            "{}x{} vs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        ),
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, name: &'static str, value: Tensor, op: Op, inputs: &[Var]) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFiniteValue { op: name });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        self.push("matmul", value, Op::MatMul(a, b), &[a, b])
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).transpose();
        self.push("transpose", value, Op::Transpose(a), &[a])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        self.push("add", value, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y)?;
        self.push("sub", value, Op::Sub(a, b), &[a, b])
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        self.push("mul", value, Op::Mul(a, b), &[a, b])
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let value = self.value(a).map(|x| x * s);
        self.push("scale", value, Op::Scale(a, s), &[a])
    }

    /// Multiplies every row of `x` (n x d) elementwise by the row vector `r` (1 x d).
    pub fn mul_row(&mut self, x: Var, r: Var) -> Result<Var> {
        let (xv, rv) = (self.value(x), self.value(r));
        if rv.rows() != 1 || rv.cols() != xv.cols() {
            return Err(shape_err("mul_row", xv, rv));
        }
        let mut value = xv.clone();
        let weights = rv.data();
        for i in 0..value.rows() {
            for (v, w) in value.row_mut(i).iter_mut().zip(weights) {
                *v *= w;
            }
        }
        self.push("mul_row", value, Op::MulRow(x, r), &[x, r])
    }

    /// Row `i` of `x` as a `1 x d` tensor.
    pub fn row(&mut self, x: Var, i: usize) -> Result<Var> {
        let xv = self.value(x);
        if i >= xv.rows() {
            return Err(Error::ShapeMismatch {
                op: "row",
                detail: format!("row {i} of {} rows", xv.rows()),
            });
        }
        let value = Tensor::row_vector(xv.row(i).to_vec());
        self.push("row", value, Op::Row(x, i), &[x])
    }

    /// Divides each row by its sum; rows summing to zero map to zero rows.
    pub fn row_normalize(&mut self, x: Var) -> Result<Var> {
        let mut value = self.value(x).clone();
        for i in 0..value.rows() {
            let row = value.row_mut(i);
            let s: f64 = row.iter().sum();
            let inv = if s == 0.0 { 0.0 } else { 1.0 / s };
            row.iter_mut().for_each(|v| *v *= inv);
        }
        self.push("row_normalize", value, Op::RowNormalize(x), &[x])
    }

    pub fn ln(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).map(f64::ln);
        self.push("ln", value, Op::Ln(x), &[x])
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).map(f64::exp);
        self.push("exp", value, Op::Exp(x), &[x])
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).map(|v| v.max(0.0));
        self.push("relu", value, Op::Relu(x), &[x])
    }

    /// Pairwise cosine similarity between the rows of `a` (n x d) and `b` (m x d).
    ///
    /// A zero row has similarity 0 with everything.
    pub fn cosine_similarity(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.cols() != bv.cols() {
            return Err(shape_err("cosine_similarity", av, bv));
        }
        let (a_hat, a_norm) = unit_rows(av);
        let (b_hat, b_norm) = unit_rows(bv);
        let mut value = Tensor::zeros(av.rows(), bv.rows());
        gemm(
            MatRef::normal(&a_hat),
            MatRef::transposed(&b_hat),
            value.data_mut(),
            0.0,
        );
        let op = Op::Cosine {
            a,
            b,
            a_hat,
            b_hat,
            a_norm,
            b_norm,
        };
        self.push("cosine_similarity", value, op, &[a, b])
    }

    /// Keeps entries where `keep` is true and zeroes the rest. The pattern is
    /// a constant selection: gradients pass through kept entries only.
    pub fn mask(&mut self, x: Var, keep: Vec<bool>) -> Result<Var> {
        let xv = self.value(x);
        if keep.len() != xv.len() {
            return Err(Error::ShapeMismatch {
                op: "mask",
                detail: format!("pattern of {} for {} entries", keep.len(), xv.len()),
            });
        }
        let mut value = xv.clone();
        for (v, &k) in value.data_mut().iter_mut().zip(&keep) {
            if !k {
                *v = 0.0;
            }
        }
        self.push("mask", value, Op::Mask(x, keep), &[x])
    }

    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Result<Var> {
        let value = self.value(x).map(|v| v.clamp(lo, hi));
        self.push("clamp", value, Op::Clamp(x, lo, hi), &[x])
    }

    /// Sum over the rows selected by `rows` of `-log softmax(logits)[label]`.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: Var,
        labels: &[usize],
        rows: &[bool],
    ) -> Result<Var> {
        let lv = self.value(logits);
        if labels.len() != lv.rows() || rows.len() != lv.rows() {
            return Err(Error::ShapeMismatch {
                op: "softmax_cross_entropy",
                detail: format!(
                    "{} labels and {} mask entries for {} rows",
                    labels.len(),
                    rows.len(),
                    lv.rows()
                ),
            });
        }
        if !rows.iter().any(|&r| r) {
            return Err(Error::EmptyMask);
        }
        let classes = lv.cols();
        let mut probs = Tensor::zeros(lv.rows(), classes);
        let mut total = 0.0;
        for i in 0..lv.rows() {
            if !rows[i] {
                continue;
            }
            let label = labels[i];
            if label >= classes {
                return Err(Error::ShapeMismatch {
                    op: "softmax_cross_entropy",
                    detail: format!("label {label} for {classes} classes"),
                });
            }
            let row = lv.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum_exp: f64 = row.iter().map(|v| (v - max).exp()).sum();
            let log_z = max + sum_exp.ln();
            total += log_z - row[label];
            for (p, v) in probs.row_mut(i).iter_mut().zip(row) {
                *p = (v - log_z).exp();
            }
        }
        let op = Op::SoftmaxCrossEntropy {
            logits,
            probs,
            labels: labels.to_vec(),
            rows: rows.to_vec(),
        };
        self.push("softmax_cross_entropy", Tensor::scalar(total), op, &[logits])
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let value = Tensor::scalar(self.value(x).sum());
        self.push("sum", value, Op::Sum(x), &[x])
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if xv.is_empty() {
            return Err(Error::ShapeMismatch {
                op: "mean",
                detail: "empty tensor".into(),
            });
        }
        let value = Tensor::scalar(xv.sum() / xv.len() as f64);
        self.push("mean", value, Op::Mean(x), &[x])
    }

    /// Mean over all entries `p` of `KL(Bernoulli(p) || Bernoulli(0.5))`.
    pub fn bernoulli_kl_mean(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if xv.is_empty() {
            return Err(Error::ShapeMismatch {
                op: "bernoulli_kl_mean",
                detail: "empty tensor".into(),
            });
        }
        let mut total = 0.0;
        for &p in xv.data() {
            total += crate::hib::bernoulli_kl(p)?;
        }
        let value = Tensor::scalar(total / xv.len() as f64);
        self.push("bernoulli_kl_mean", value, Op::BernoulliKlMean(x), &[x])
    }

    /// Inverted dropout. With `training == false` or `rate == 0` the input
    /// handle itself is returned.
    pub fn dropout(&mut self, x: Var, rate: f64, rng: &mut Rng, training: bool) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidRate(rate));
        }
        if !training || rate == 0.0 {
            return Ok(x);
        }
        let keep_scale = 1.0 / (1.0 - rate);
        let factors: Vec<f64> = (0..self.value(x).len())
            .map(|_| {
                if rng.gen::<f64>() < rate {
                    0.0
                } else {
                    keep_scale
                }
            })
            .collect();
        let mut value = self.value(x).clone();
        for (v, f) in value.data_mut().iter_mut().zip(&factors) {
            *v *= f;
        }
        self.push("dropout", value, Op::Dropout(x, factors), &[x])
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.shape() != [1, 1] {
            return Err(Error::NonScalarLoss {
                rows: lv.rows(),
                cols: lv.cols(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.wants(*a) {
                    let mut da = Tensor::zeros(av.rows(), av.cols());
                    gemm(
                        MatRef::normal(g),
                        MatRef::transposed(bv),
                        da.data_mut(),
                        0.0,
                    );
                    accumulate(grads, *a, da);
                }
                if self.wants(*b) {
                    let mut db = Tensor::zeros(bv.rows(), bv.cols());
                    gemm(
                        MatRef::transposed(av),
                        MatRef::normal(g),
                        db.data_mut(),
                        0.0,
                    );
                    accumulate(grads, *b, db);
                }
            }
            Op::Transpose(a) => {
                if self.wants(*a) {
                    accumulate(grads, *a, g.transpose());
                }
            }
            Op::Add(a, b) => {
                if self.wants(*a) {
                    accumulate(grads, *a, g.clone());
                }
                if self.wants(*b) {
                    accumulate(grads, *b, g.clone());
                }
            }
            Op::Sub(a, b) => {
                if self.wants(*a) {
                    accumulate(grads, *a, g.clone());
                }
                if self.wants(*b) {
                    accumulate(grads, *b, g.map(|v| -v));
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.wants(*a) {
                    accumulate(grads, *a, g.zip_map(bv, |x, y| x * y).expect("mul shape"));
                }
                if self.wants(*b) {
                    accumulate(grads, *b, g.zip_map(av, |x, y| x * y).expect("mul shape"));
                }
            }
            Op::Scale(a, s) => {
                if self.wants(*a) {
                    accumulate(grads, *a, g.map(|v| v * s));
                }
            }
            Op::MulRow(x, r) => {
                let (xv, rv) = (self.value(*x), self.value(*r));
                if self.wants(*x) {
                    let mut dx = g.clone();
                    for i in 0..dx.rows() {
                        for (v, w) in dx.row_mut(i).iter_mut().zip(rv.data()) {
                            *v *= w;
                        }
                    }
                    accumulate(grads, *x, dx);
                }
                if self.wants(*r) {
                    let mut dr = vec![0.0; rv.cols()];
                    for i in 0..xv.rows() {
                        for ((d, gx), xx) in dr.iter_mut().zip(g.row(i)).zip(xv.row(i)) {
                            *d += gx * xx;
                        }
                    }
                    accumulate(grads, *r, Tensor::row_vector(dr));
                }
            }
            Op::Row(x, i) => {
                if self.wants(*x) {
                    let xv = self.value(*x);
                    let mut dx = Tensor::zeros(xv.rows(), xv.cols());
                    dx.row_mut(*i).copy_from_slice(g.data());
                    accumulate(grads, *x, dx);
                }
            }
            Op::RowNormalize(x) => {
                if self.wants(*x) {
                    let xv = self.value(*x);
                    let y = &node.value;
                    let mut dx = Tensor::zeros(xv.rows(), xv.cols());
                    for i in 0..xv.rows() {
                        let s: f64 = xv.row(i).iter().sum();
                        if s == 0.0 {
                            continue;
                        }
                        let dot: f64 = g.row(i).iter().zip(y.row(i)).map(|(a, b)| a * b).sum();
                        for (d, gi) in dx.row_mut(i).iter_mut().zip(g.row(i)) {
                            *d = (gi - dot) / s;
                        }
                    }
                    accumulate(grads, *x, dx);
                }
            }
            Op::Ln(x) => {
                if self.wants(*x) {
                    let dx = g.zip_map(self.value(*x), |gi, xi| gi / xi).expect("ln shape");
                    accumulate(grads, *x, dx);
                }
            }
            Op::Exp(x) => {
                if self.wants(*x) {
                    let dx = g.zip_map(&node.value, |gi, yi| gi * yi).expect("exp shape");
                    accumulate(grads, *x, dx);
                }
            }
            Op::Relu(x) => {
                if self.wants(*x) {
                    let dx = g
                        .zip_map(self.value(*x), |gi, xi| if xi > 0.0 { gi } else { 0.0 })
                        .expect("relu shape");
                    accumulate(grads, *x, dx);
                }
            }
            Op::Cosine {
                a,
                b,
                a_hat,
                b_hat,
                a_norm,
                b_norm,
            } => {
                if self.wants(*a) {
                    let mut d_hat = Tensor::zeros(a_hat.rows(), a_hat.cols());
                    gemm(
                        MatRef::normal(g),
                        MatRef::normal(b_hat),
                        d_hat.data_mut(),
                        0.0,
                    );
                    accumulate(grads, *a, unit_rows_backward(a_hat, a_norm, d_hat));
                }
                if self.wants(*b) {
                    let mut d_hat = Tensor::zeros(b_hat.rows(), b_hat.cols());
                    gemm(
                        MatRef::transposed(g),
                        MatRef::normal(a_hat),
                        d_hat.data_mut(),
                        0.0,
                    );
                    accumulate(grads, *b, unit_rows_backward(b_hat, b_norm, d_hat));
                }
            }
            Op::Mask(x, keep) => {
                if self.wants(*x) {
                    let mut dx = g.clone();
                    for (v, &k) in dx.data_mut().iter_mut().zip(keep) {
                        if !k {
                            *v = 0.0;
                        }
                    }
                    accumulate(grads, *x, dx);
                }
            }
            Op::Clamp(x, lo, hi) => {
                if self.wants(*x) {
                    let dx = g
                        .zip_map(self.value(*x), |gi, xi| {
                            if xi < *lo || xi > *hi {
                                0.0
                            } else {
                                gi
                            }
                        })
                        .expect("clamp shape");
                    accumulate(grads, *x, dx);
                }
            }
            Op::SoftmaxCrossEntropy {
                logits,
                probs,
                labels,
                rows,
            } => {
                if self.wants(*logits) {
                    let scale = g.data()[0];
                    let mut dx = Tensor::zeros(probs.rows(), probs.cols());
                    for i in 0..probs.rows() {
                        if !rows[i] {
                            continue;
                        }
                        for (c, (d, p)) in dx.row_mut(i).iter_mut().zip(probs.row(i)).enumerate() {
                            let target = if c == labels[i] { 1.0 } else { 0.0 };
                            *d = scale * (p - target);
                        }
                    }
                    accumulate(grads, *logits, dx);
                }
            }
            Op::Sum(x) => {
                if self.wants(*x) {
                    let xv = self.value(*x);
                    accumulate(grads, *x, Tensor::full(xv.rows(), xv.cols(), g.data()[0]));
                }
            }
            Op::Mean(x) => {
                if self.wants(*x) {
                    let xv = self.value(*x);
                    let v = g.data()[0] / xv.len() as f64;
                    accumulate(grads, *x, Tensor::full(xv.rows(), xv.cols(), v));
                }
            }
            Op::BernoulliKlMean(x) => {
                if self.wants(*x) {
                    let xv = self.value(*x);
                    let scale = g.data()[0] / xv.len() as f64;
                    let floor = KL_LOG_FLOOR.ln();
                    let dx = xv.map(|p| {
                        let lp = p.ln().max(floor);
                        let lq = (1.0 - p).ln().max(floor);
                        scale * (lp - lq)
                    });
                    accumulate(grads, *x, dx);
                }
            }
            Op::Dropout(x, factors) => {
                if self.wants(*x) {
                    let mut dx = g.clone();
                    for (v, f) in dx.data_mut().iter_mut().zip(factors) {
                        *v *= f;
                    }
                    accumulate(grads, *x, dx);
                }
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, delta: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (e, d) in existing.data_mut().iter_mut().zip(delta.data()) {
                *e += d;
            }
        }
        slot @ None => *slot = Some(delta),
    }
}

fn unit_rows(x: &Tensor) -> (Tensor, Vec<f64>) {
    let mut hat = x.clone();
    let mut norms = Vec::with_capacity(x.rows());
    for i in 0..x.rows() {
        let row = hat.row_mut(i);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
        norms.push(norm);
    }
    (hat, norms)
}

// d x_i = (d xhat_i - xhat_i <xhat_i, d xhat_i>) / |x_i|
fn unit_rows_backward(hat: &Tensor, norms: &[f64], mut d_hat: Tensor) -> Tensor {
    for (i, &norm) in norms.iter().enumerate() {
        let h = hat.row(i);
        let row = d_hat.row_mut(i);
        if norm == 0.0 {
            row.iter_mut().for_each(|v| *v = 0.0);
            continue;
        }
        let dot: f64 = row.iter().zip(h).map(|(a, b)| a * b).sum();
        for (d, hv) in row.iter_mut().zip(h) {
            *d = (*d - hv * dot) / norm;
        }
    }
    d_hat
}
