use std::sync::Arc;

use super::actions::{round_hops, ActionVector, HopMix};
use crate::error::{Error, Result};
use crate::graph::{CsrGraph, PropagationCache};
use crate::tensor::{LinearMap, Tensor};

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha {alpha} outside [0, 1]")));
    }
    Ok(())
}

fn add_scaled(out: &mut [f64], c: f64, row: &[f64]) {
    if c != 0.0 {
        for (o, &x) in out.iter_mut().zip(row) {
            *o += c * x;
        }
    }
}

/// Writes node `i`'s combined row into `out` using the cached powers.
pub fn combine_node(cache: &PropagationCache, i: usize, a: f64, alpha: f64, out: &mut [f64]) -> Result<()> {
    let mix = HopMix::new(a, alpha);
    if mix.depth() > cache.depth() {
        return Err(Error::invalid(format!(
            "action {a} needs propagation depth {} but the cache holds {}",
            mix.depth(),
            cache.depth()
        )));
    }
    for (o, &h) in out.iter_mut().zip(cache.features().row(i)) {
        *o = alpha * h;
    }
    for k in 1..=mix.depth() {
        add_scaled(out, mix.coefficient(k), cache.power(k).row(i));
    }
    Ok(())
}

/// Shared-parameter aggregation over precomputed powers; see [`HopMix`]
/// for the per-node weights. The self term uses `P_0`, the matrix the
/// cache was built from.
pub fn granular_combine(cache: &PropagationCache, actions: &ActionVector, alpha: f64) -> Result<Tensor> {
    check_alpha(alpha)?;
    let h = cache.features();
    if actions.len() != h.rows() {
        return Err(Error::invalid(format!(
            "{} actions for {} feature rows",
            actions.len(),
            h.rows()
        )));
    }
    if actions.required_depth() > cache.depth() {
        return Err(Error::invalid(format!(
            "actions need propagation depth {} but the cache holds {}",
            actions.required_depth(),
            cache.depth()
        )));
    }
    let mut z = Tensor::zeros(h.shape());
    for i in 0..h.rows() {
        combine_node(cache, i, actions.get(i), alpha, z.row_mut(i))?;
    }
    Ok(z)
}

/// The same aggregation applied to an arbitrary hidden matrix, with the
/// powers of `Â` computed on the fly. Used for layers past the first.
#[derive(Debug, Clone)]
pub struct GranularPropagation {
    graph: Arc<CsrGraph>,
    mixes: Vec<HopMix>,
    depth: usize,
    alpha: f64,
}

impl GranularPropagation {
    pub fn new(graph: Arc<CsrGraph>, actions: &ActionVector, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !graph.is_normalized() {
            return Err(Error::invalid("granular propagation needs a normalized graph"));
        }
        if actions.len() != graph.n_nodes() {
            return Err(Error::invalid(format!(
                "{} actions for {} nodes",
                actions.len(),
                graph.n_nodes()
            )));
        }
        let mixes: Vec<HopMix> = actions.values().iter().map(|&a| HopMix::new(a, alpha)).collect();
        let depth = actions.required_depth();
        Ok(Self {
            graph,
            mixes,
            depth,
            alpha,
        })
    }

    fn add_diag(&self, acc: &mut Tensor, k: usize, g: &Tensor) {
        for (i, mix) in self.mixes.iter().enumerate() {
            add_scaled(acc.row_mut(i), mix.coefficient(k), g.row(i));
        }
    }
}

impl LinearMap for GranularPropagation {
    fn apply(&self, input: &Tensor) -> Result<Tensor> {
        if input.shape().len() != 2 || input.rows() != self.mixes.len() {
            return Err(Error::Shape {
                op: "granular_propagation",
                lhs: vec![self.mixes.len(), self.mixes.len()],
                rhs: input.shape().to_vec(),
            });
        }
        let alpha = self.alpha;
        let mut z = input.map(|x| alpha * x);
        let mut current = input.clone();
        for k in 1..=self.depth {
            current = self.graph.spmm(&current)?;
            self.add_diag(&mut z, k, &current);
        }
        Ok(z)
    }

    // Z = αH + Σ_k D_k Â^k H with Â symmetric, so the adjoint is
    // αG + Â(D_1 G + Â(D_2 G + ...)).
    fn adjoint(&self, grad_out: &Tensor) -> Tensor {
        let mut acc = Tensor::zeros(grad_out.shape());
        self.add_diag(&mut acc, self.depth, grad_out);
        for k in (1..self.depth).rev() {
            acc = self.graph.spmm(&acc).expect("validated shape");
            self.add_diag(&mut acc, k, grad_out);
        }
        let mut out = self.graph.spmm(&acc).expect("validated shape");
        out.axpy(self.alpha, grad_out);
        out
    }
}

fn propagate_row(graph: &CsrGraph, h: &Tensor, v: usize) -> Vec<f64> {
    let mut out = vec![0.0; h.cols()];
    let weights = graph.row_weights(v).expect("normalized graph");
    for (&u, &w) in graph.row(v).iter().zip(weights) {
        for (o, &x) in out.iter_mut().zip(h.row(u)) {
            *o += w * x;
        }
    }
    out
}

/// Per-node recursive form without learnable weights:
/// `h^k = relu(Â h^{k-1})` up to `k = ⟨a⟩`, then
/// `h_v = h^⟨a⟩_v / ⟨a⟩ + (a-⌊a⌋)(Â h^{⟨a⟩-1})_v + (⌈a⌉-a)(Â h^⟨a⟩)_v`.
///
/// Not numerically equivalent to [`granular_combine`]; kept as a reference.
pub fn reference_aggregate(graph: &CsrGraph, features: &Tensor, v: usize, a: f64) -> Result<Vec<f64>> {
    if !graph.is_normalized() {
        return Err(Error::invalid("reference aggregation needs a normalized graph"));
    }
    if v >= graph.n_nodes() || features.rows() != graph.n_nodes() {
        return Err(Error::invalid(format!(
            "node {v} or feature rows {} inconsistent with {} nodes",
            features.rows(),
            graph.n_nodes()
        )));
    }
    if !a.is_finite() || a < 1.0 {
        return Err(Error::invalid(format!("action {a} below 1")));
    }
    let rounded = round_hops(a);
    let mut previous = features.clone();
    let mut current = features.clone();
    for _ in 0..rounded {
        let next = graph.spmm(&current)?.map(|x| x.max(0.0));
        previous = std::mem::replace(&mut current, next);
    }
    let lower = propagate_row(graph, &previous, v);
    let upper = propagate_row(graph, &current, v);
    let (lo, hi) = (a - a.floor(), a.ceil() - a);
    let deep = current.row(v);
    Ok((0..features.cols())
        .map(|j| deep[j] / rounded as f64 + lo * lower[j] + hi * upper[j])
        .collect())
}
