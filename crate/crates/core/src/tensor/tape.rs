//! Define-by-run reverse-mode differentiation over [`Tensor`] values.
//!
//! A [`Tape`] is built fresh for every forward pass. Each operation appends a
//! node holding its output value and enough context to run its backward rule;
//! inputs always precede the node that consumes them, so a single reverse
//! sweep visits every node once.

use std::fmt;
use std::sync::Arc;

use super::dense::{gemm, MatRef, Tensor};
use super::rng::SeededRng;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A fixed linear operator `y = L(x)` with a known adjoint, used for graph
/// propagation steps whose matrices are not themselves learnable.
pub trait LinearMap: Send + Sync + fmt::Debug {
    fn apply(&self, input: &Tensor) -> Result<Tensor>;

    /// Computes `L^T(grad_out)`.
    fn adjoint(&self, grad_out: &Tensor) -> Tensor;
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Shift(Var),
    Relu(Var),
    Tanh(Var),
    Dropout(Var, Vec<f64>),
    LogSoftmax(Var),
    NllLoss(Var, Vec<usize>),
    Mse(Var, Var),
    ConcatCols(Var, Var),
    GatherRows(Var, Vec<usize>),
    Sum(Var),
    Mean(Var),
    Linear(Var, Arc<dyn LinearMap>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar output with respect to every node on the tape.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Gradient for `var`, or zeros shaped like `like` when the output does
    /// not depend on it.
    pub fn wrt(&self, var: Var, like: &Tensor) -> Tensor {
        self.get(var).cloned().unwrap_or_else(|| Tensor::zeros(like.shape()))
    }
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
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

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    /// Records an input (parameter or constant).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if !x.same_shape(y) {
            return Err(mismatch("add", x, y));
        }
        let out = x.zip_map(y, |p, q| p + q);
        Ok(self.push(out, Op::Add(a, b)))
    }

    /// Adds a `[1, cols]` (or `[cols]`) row vector to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (x, b) = (self.value(a), self.value(bias));
        if x.shape().len() != 2 || b.len() != x.cols() || b.rows() != 1 {
            return Err(mismatch("add_row", x, b));
        }
        let mut out = x.clone();
        let cols = x.cols();
        for r in 0..x.rows() {
            for (o, bv) in out.row_mut(r).iter_mut().zip(b.data()) {
                *o += bv;
            }
        }
        debug_assert_eq!(cols, b.len());
        Ok(self.push(out, Op::AddRow(a, bias)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if !x.same_shape(y) {
            return Err(mismatch("sub", x, y));
        }
        let out = x.zip_map(y, |p, q| p - q);
        Ok(self.push(out, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if !x.same_shape(y) {
            return Err(mismatch("mul", x, y));
        }
        let out = x.zip_map(y, |p, q| p * q);
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).map(|v| v * s);
        self.push(out, Op::Scale(a, s))
    }

    /// Adds a constant to every entry.
    pub fn shift(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).map(|v| v + s);
        self.push(out, Op::Shift(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|v| if v > 0.0 { v } else { 0.0 });
        self.push(out, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        self.push(out, Op::Tanh(a))
    }

    /// Inverted dropout: in training mode each entry is zeroed with
    /// probability `p` and survivors are scaled by `1/(1-p)`; in eval mode
    /// the input passes through unchanged.
    pub fn dropout(&mut self, a: Var, p: f64, rng: &mut SeededRng, training: bool) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::invalid(format!("dropout probability {p} outside [0, 1)")));
        }
        if !training || p == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 / (1.0 - p);
        let x = &self.nodes[a.0].value;
        let mask: Vec<f64> = (0..x.len())
            .map(|_| if rng.uniform() < p { 0.0 } else { keep })
            .collect();
        let mut out = x.clone();
        for (o, m) in out.data_mut().iter_mut().zip(&mask) {
            *o *= m;
        }
        Ok(self.push(out, Op::Dropout(a, mask)))
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut out = x.clone();
        for r in 0..x.rows() {
            let row = out.row_mut(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            row.iter_mut().for_each(|v| *v -= lse);
        }
        self.push(out, Op::LogSoftmax(a))
    }

    /// Mean negative log-likelihood of `targets[i]` under row `i` of the
    /// log-probability matrix.
    pub fn nll_loss(&mut self, log_probs: Var, targets: &[usize]) -> Result<Var> {
        let lp = self.value(log_probs);
        if lp.rows() != targets.len() || targets.is_empty() {
            return Err(Error::Shape {
                op: "nll_loss",
                lhs: lp.shape().to_vec(),
                rhs: vec![targets.len()],
            });
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= lp.cols()) {
            return Err(Error::invalid(format!(
                "nll_loss: class id {bad} out of range for {} classes",
                lp.cols()
            )));
        }
        let total: f64 = targets.iter().enumerate().map(|(i, &t)| -lp.get(i, t)).sum();
        let out = Tensor::scalar(total / targets.len() as f64);
        Ok(self.push(out, Op::NllLoss(log_probs, targets.to_vec())))
    }

    /// Mean squared difference.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if !x.same_shape(y) {
            return Err(mismatch("mse", x, y));
        }
        let n = x.len().max(1) as f64;
        let s: f64 = x.data().iter().zip(y.data()).map(|(p, q)| (p - q) * (p - q)).sum();
        Ok(self.push(Tensor::scalar(s / n), Op::Mse(a, b)))
    }

    /// Joins two matrices with the same row count side by side.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape().len() != 2 || y.shape().len() != 2 || x.rows() != y.rows() {
            return Err(mismatch("concat_cols", x, y));
        }
        let (rows, ca, cb) = (x.rows(), x.cols(), y.cols());
        let mut data = Vec::with_capacity(rows * (ca + cb));
        for r in 0..rows {
            data.extend_from_slice(x.row(r));
            data.extend_from_slice(y.row(r));
        }
        let out = Tensor::matrix(rows, ca + cb, data)?;
        Ok(self.push(out, Op::ConcatCols(a, b)))
    }

    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let x = self.value(a);
        if let Some(&bad) = idx.iter().find(|&&i| i >= x.rows()) {
            return Err(Error::invalid(format!(
                "gather_rows: row {bad} out of range for {} rows",
                x.rows()
            )));
        }
        let out = x.gather_rows(idx);
        Ok(self.push(out, Op::GatherRows(a, idx.to_vec())))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(out, Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let out = Tensor::scalar(x.sum() / x.len().max(1) as f64);
        self.push(out, Op::Mean(a))
    }

    pub fn linear_map(&mut self, a: Var, map: Arc<dyn LinearMap>) -> Result<Var> {
        let out = map.apply(self.value(a))?;
        Ok(self.push(out, Op::Linear(a, map)))
    }

    /// Back-propagates from a single-element output.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out_value = self.value(output);
        if !out_value.is_scalar() {
            return Err(Error::invalid(format!(
                "backward needs a scalar output, got shape {:?}",
                out_value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::full(out_value.shape(), 1.0));

        for id in (0..=output.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            self.propagate(node, &g, &mut grads);
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (x, y) = (val(*a), val(*b));
                let (m, k, n) = (x.rows(), x.cols(), y.cols());
                let mut da = Tensor::zeros(x.shape());
                gemm(
                    m,
                    n,
                    k,
                    MatRef::new(g.data(), n, 1),
                    MatRef::transposed(y.data(), n),
                    da.data_mut(),
                    0.0,
                );
                let mut db = Tensor::zeros(y.shape());
                gemm(
                    k,
                    m,
                    n,
                    MatRef::transposed(x.data(), k),
                    MatRef::new(g.data(), n, 1),
                    db.data_mut(),
                    0.0,
                );
                accumulate(grads, *a, da);
                accumulate(grads, *b, db);
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.clone());
            }
            Op::AddRow(a, bias) => {
                let mut db = Tensor::zeros(val(*bias).shape());
                for r in 0..g.rows() {
                    for (d, gv) in db.data_mut().iter_mut().zip(g.row(r)) {
                        *d += gv;
                    }
                }
                accumulate(grads, *a, g.clone());
                accumulate(grads, *bias, db);
            }
            Op::Sub(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                accumulate(grads, *a, g.zip_map(val(*b), |p, q| p * q));
                accumulate(grads, *b, g.zip_map(val(*a), |p, q| p * q));
            }
            Op::Scale(a, s) => accumulate(grads, *a, g.map(|v| v * s)),
            Op::Shift(a) => accumulate(grads, *a, g.clone()),
            Op::Relu(a) => {
                let d = g.zip_map(val(*a), |gv, x| if x > 0.0 { gv } else { 0.0 });
                accumulate(grads, *a, d);
            }
            Op::Tanh(a) => {
                let d = g.zip_map(&node.value, |gv, y| gv * (1.0 - y * y));
                accumulate(grads, *a, d);
            }
            Op::Dropout(a, mask) => {
                let mut d = g.clone();
                for (v, m) in d.data_mut().iter_mut().zip(mask) {
                    *v *= m;
                }
                accumulate(grads, *a, d);
            }
            Op::LogSoftmax(a) => {
                let y = &node.value;
                let mut d = g.clone();
                for r in 0..y.rows() {
                    let gsum: f64 = g.row(r).iter().sum();
                    for (dv, yv) in d.row_mut(r).iter_mut().zip(y.row(r)) {
                        *dv -= yv.exp() * gsum;
                    }
                }
                accumulate(grads, *a, d);
            }
            Op::NllLoss(a, targets) => {
                let lp = val(*a);
                let mut d = Tensor::zeros(lp.shape());
                let w = -g.item() / targets.len() as f64;
                let cols = lp.cols();
                for (i, &t) in targets.iter().enumerate() {
                    d.data_mut()[i * cols + t] += w;
                }
                accumulate(grads, *a, d);
            }
            Op::Mse(a, b) => {
                let (x, y) = (val(*a), val(*b));
                let w = 2.0 * g.item() / x.len().max(1) as f64;
                let da = x.zip_map(y, |p, q| w * (p - q));
                accumulate(grads, *b, da.map(|v| -v));
                accumulate(grads, *a, da);
            }
            Op::ConcatCols(a, b) => {
                let (x, y) = (val(*a), val(*b));
                let (ca, cb) = (x.cols(), y.cols());
                let mut da = Vec::with_capacity(x.len());
                let mut db = Vec::with_capacity(y.len());
                for r in 0..g.rows() {
                    let row = g.row(r);
                    da.extend_from_slice(&row[..ca]);
                    db.extend_from_slice(&row[ca..ca + cb]);
                }
                accumulate(grads, *a, Tensor::new(x.shape().to_vec(), da).expect("concat split"));
                accumulate(grads, *b, Tensor::new(y.shape().to_vec(), db).expect("concat split"));
            }
            Op::GatherRows(a, idx) => {
                let x = val(*a);
                let mut d = Tensor::zeros(x.shape());
                for (r, &i) in idx.iter().enumerate() {
                    for (dv, gv) in d.row_mut(i).iter_mut().zip(g.row(r)) {
                        *dv += gv;
                    }
                }
                accumulate(grads, *a, d);
            }
            Op::Sum(a) => accumulate(grads, *a, Tensor::full(val(*a).shape(), g.item())),
            Op::Mean(a) => {
                let x = val(*a);
                accumulate(grads, *a, Tensor::full(x.shape(), g.item() / x.len().max(1) as f64));
            }
            Op::Linear(a, map) => accumulate(grads, *a, map.adjoint(g)),
        }
    }
}

fn accumulate(grads: &mut [Option<Tensor>], var: Var, delta: Tensor) {
    match &mut grads[var.0] {
        Some(existing) => existing.axpy(1.0, &delta),
        slot @ None => *slot = Some(delta),
    }
}
