//! Randomized finite-difference checks over every tape operation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::dense::Tensor;
use super::gradcheck::grad_check;
use super::rng::SeededRng;
use super::tape::{LinearMap, Tape, Var};
use crate::error::Result;

pub const DEFAULT_TOLERANCE: f64 = 1e-4;
pub const SATURATED_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OpCheck {
    pub op: String,
    pub instances: usize,
    pub max_error: f64,
    pub tolerance: f64,
}

impl OpCheck {
    pub fn passed(&self) -> bool {
        self.max_error < self.tolerance
    }
}

/// Dense matrix as a [`LinearMap`], left-multiplying its input.
#[derive(Debug)]
struct DenseMap(Tensor);

impl LinearMap for DenseMap {
    fn apply(&self, input: &Tensor) -> Result<Tensor> {
        self.0.matmul(input)
    }

    fn adjoint(&self, grad_out: &Tensor) -> Tensor {
        self.0.transpose().matmul(grad_out).expect("adjoint shapes")
    }
}

fn randn(rng: &mut SeededRng, rows: usize, cols: usize, scale: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| scale * rng.normal()).collect();
    Tensor::matrix(rows, cols, data).unwrap()
}

/// Random entries bounded away from zero so the relu kink is never inside
/// the finite-difference stencil.
fn randn_off_kink(rng: &mut SeededRng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| {
            let v: f64 = rng.normal();
            if v.abs() < 0.05 {
                v.signum() * 0.05 + v
            } else {
                v
            }
        })
        .collect();
    Tensor::matrix(rows, cols, data).unwrap()
}

/// Reduces `y` to a scalar through fixed random weights so every output
/// coordinate carries a distinct upstream gradient.
fn weighted_sum(tape: &mut Tape, y: Var, weights: &Tensor) -> Result<Var> {
    let w = tape.leaf(weights.clone());
    let p = tape.mul(y, w)?;
    Ok(tape.sum(p))
}

type Case = Box<dyn Fn(&mut Tape, Var) -> Result<Var>>;

fn case_for(op: &str, rng: &mut SeededRng) -> (Tensor, Case) {
    let rows = 1 + rng.below(4);
    let cols = 1 + rng.below(4);
    let inner = 1 + rng.below(4);
    match op {
        "matmul_lhs" => {
            let b = randn(rng, cols, inner, 1.0);
            let w = randn(rng, rows, inner, 1.0);
            let x = randn(rng, rows, cols, 1.0);
            (
                x,
                Box::new(move |t, v| {
                    let bv = t.leaf(b.clone());
                    let y = t.matmul(v, bv)?;
                    weighted_sum(t, y, &w)
                }),
            )
        }
        "matmul_rhs" => {
            let a = randn(rng, inner, rows, 1.0);
            let w = randn(rng, inner, cols, 1.0);
            let x = randn(rng, rows, cols, 1.0);
            (
                x,
                Box::new(move |t, v| {
                    let av = t.leaf(a.clone());
                    let y = t.matmul(av, v)?;
                    weighted_sum(t, y, &w)
                }),
            )
        }
        "add" | "sub" | "mul" => {
            let other = randn(rng, rows, cols, 1.0);
            let w = randn(rng, rows, cols, 1.0);
            let x = randn(rng, rows, cols, 1.0);
            let op = op.to_string();
            (
                x,
                Box::new(move |t, v| {
                    let o = t.leaf(other.clone());
                    // input on both sides of the binary op
                    let y1 = match op.as_str() {
                        "add" => t.add(v, o)?,
                        "sub" => t.sub(o, v)?,
                        _ => t.mul(v, o)?,
                    };
                    let y2 = match op.as_str() {
                        "add" => t.add(o, v)?,
                        "sub" => t.sub(v, o)?,
                        _ => t.mul(v, v)?,
                    };
                    let y = t.add(y1, y2)?;
                    weighted_sum(t, y, &w)
                }),
            )
        }
        "add_row_bias" => {
            let base = randn(rng, rows, cols, 1.0);
            let w = randn(rng, rows, cols, 1.0);
            let x = randn(rng, 1, cols, 1.0);
            (
                x,
                Box::new(move |t, v| {
                    let b = t.leaf(base.clone());
                    let y = t.add_row(b, v)?;
                    weighted_sum(t, y, &w)
                }),
            )
        }
        "scale" | "shift" => {
            let s = rng.normal();
            let w = randn(rng, rows, cols, 1.0);
            let x = randn(rng, rows, cols, 1.0);
            let is_scale = op == "scale";
            (
                x,
                Box::new(move |t, v| {
                    let y = if is_scale { t.scale(v, s) } else { t.shift(v, s) };
                    let y = t.mul(y, v)?;
                    weighted_sum(t, y, &w)
                }),
            )
        }
        "relu" => {
            let w = randn(rng, rows, cols, 1.0);
            let x = randn_off_kink(rng, rows, cols);
            (
                x,
                Box::new(move |t, v| {
                    let y = t.relu(v);
                    weighted_sum(t, y, &w)
                }),
            )
        }
        "tanh" => {
            let w = randn(rng, rows, cols, 1.0);
            let x = randn(rng, rows, cols, 1.5);
            (
                x,
                Box::new(move |t, v| {
                    let y = t.tanh(v);
                    weighted_sum(t, y, &w)
                }),
            )
        }
        "dropout" => {
            let w = randn(rng, rows, cols, 1.0);
            let x = randn(rng, rows, cols, 1.0);
            let seed = rng.next_u64();
            (
                x,
                Box::new(move |t, v| {
                    let mut r = SeededRng::new(seed);
                    let y = t.dropout(v, 0.5, &mut r, true)?;
                    weighted_sum(t, y, &w)
                }),
            )
        }
        "log_softmax" | "log_softmax_saturated" => {
            let w = randn(rng, rows, cols + 1, 1.0);
            let scale = if op == "log_softmax" { 1.0 } else { 30.0 };
            let x = randn(rng, rows, cols + 1, scale);
            (
                x,
                Box::new(move |t, v| {
                    let y = t.log_softmax(v);
                    weighted_sum(t, y, &w)
                }),
            )
        }
        "nll_loss" => {
            let classes = cols + 1;
            let targets: Vec<usize> = (0..rows).map(|_| rng.below(classes)).collect();
            let x = randn(rng, rows, classes, 1.0);
            (
                x,
                Box::new(move |t, v| {
                    let lp = t.log_softmax(v);
                    t.nll_loss(lp, &targets)
                }),
            )
        }
        "mse" => {
            let target = randn(rng, rows, cols, 1.0);
            let x = randn(rng, rows, cols, 1.0);
            (
                x,
                Box::new(move |t, v| {
                    let y = t.leaf(target.clone());
                    let a = t.mse(v, y)?;
                    let b = t.mse(y, v)?;
                    t.add(a, b)
                }),
            )
        }
        "concat_cols" => {
            let other = randn(rng, rows, inner, 1.0);
            let w = randn(rng, rows, cols + inner, 1.0);
            let w2 = randn(rng, rows, inner + cols, 1.0);
            let x = randn(rng, rows, cols, 1.0);
            (
                x,
                Box::new(move |t, v| {
                    let o = t.leaf(other.clone());
                    let y1 = t.concat_cols(v, o)?;
                    let y2 = t.concat_cols(o, v)?;
                    let a = weighted_sum(t, y1, &w)?;
                    let b = weighted_sum(t, y2, &w2)?;
                    t.add(a, b)
                }),
            )
        }
        "gather_rows" => {
            let idx: Vec<usize> = (0..rows + 2).map(|_| rng.below(rows)).collect();
            let w = randn(rng, idx.len(), cols, 1.0);
            let x = randn(rng, rows, cols, 1.0);
            (
                x,
                Box::new(move |t, v| {
                    let y = t.gather_rows(v, &idx)?;
                    weighted_sum(t, y, &w)
                }),
            )
        }
        "sum" | "mean" => {
            let x = randn(rng, rows, cols, 1.0);
            let is_sum = op == "sum";
            (
                x,
                Box::new(move |t, v| {
                    let sq = t.mul(v, v)?;
                    Ok(if is_sum { t.sum(sq) } else { t.mean(sq) })
                }),
            )
        }
        "linear_map" => {
            let m = randn(rng, inner, rows, 1.0);
            let w = randn(rng, inner, cols, 1.0);
            let x = randn(rng, rows, cols, 1.0);
            let map: Arc<dyn LinearMap> = Arc::new(DenseMap(m));
            (
                x,
                Box::new(move |t, v| {
                    let y = t.linear_map(v, map.clone())?;
                    weighted_sum(t, y, &w)
                }),
            )
        }
        other => unreachable!("unknown op {other}"),
    }
}

pub const SUITE_OPS: &[&str] = &[
    "matmul_lhs",
    "matmul_rhs",
    "add",
    "add_row_bias",
    "sub",
    "mul",
    "scale",
    "shift",
    "relu",
    "tanh",
    "dropout",
    "log_softmax",
    "log_softmax_saturated",
    "nll_loss",
    "mse",
    "concat_cols",
    "gather_rows",
    "sum",
    "mean",
    "linear_map",
];

/// Runs `instances` random gradient checks per operation.
pub fn run_gradient_suite(instances: usize, seed: u64, eps: f64) -> Result<Vec<OpCheck>> {
    let root = SeededRng::new(seed);
    let mut out = Vec::with_capacity(SUITE_OPS.len());
    for (k, op) in SUITE_OPS.iter().enumerate() {
        let mut rng = root.derive(k as u64);
        let mut max_error = 0.0f64;
        for _ in 0..instances {
            let (x, f) = case_for(op, &mut rng);
            max_error = max_error.max(grad_check(f, &x, eps)?);
        }
        let tolerance = if *op == "log_softmax_saturated" {
            SATURATED_TOLERANCE
        } else {
            DEFAULT_TOLERANCE
        };
        out.push(OpCheck {
            op: op.to_string(),
            instances,
            max_error,
            tolerance,
        });
    }
    Ok(out)
}
