use std::sync::Arc;

use super::csr::CsrGraph;
use crate::error::{Error, Result};
use crate::tensor::{LinearMap, Tensor};

/// Precomputed powers `P_k = Â^k X` for `k = 0..=k_max + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct PropagationCache {
    powers: Vec<Tensor>,
    k_max: usize,
}

impl PropagationCache {
    pub fn build(graph: &CsrGraph, features: &Tensor, k_max: usize) -> Result<Self> {
        if k_max < 1 {
            return Err(Error::invalid("propagation cache needs k_max >= 1"));
        }
        if !graph.is_normalized() {
            return Err(Error::invalid("propagation cache needs a normalized graph"));
        }
        let mut powers = Vec::with_capacity(k_max + 2);
        powers.push(features.clone());
        for k in 1..=k_max + 1 {
            let next = graph.spmm(&powers[k - 1])?;
            powers.push(next);
        }
        Ok(Self { powers, k_max })
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Highest stored power (`k_max + 1`).
    pub fn depth(&self) -> usize {
        self.powers.len() - 1
    }

    pub fn power(&self, k: usize) -> &Tensor {
        &self.powers[k]
    }

    pub fn features(&self) -> &Tensor {
        &self.powers[0]
    }
}

/// `x ↦ Â x` as a differentiable map. `Â` is symmetric, so the adjoint is
/// the same product.
#[derive(Debug, Clone)]
pub struct Propagation {
    graph: Arc<CsrGraph>,
}

impl Propagation {
    pub fn new(graph: Arc<CsrGraph>) -> Result<Self> {
        if !graph.is_normalized() {
            return Err(Error::invalid("propagation needs a normalized graph"));
        }
        Ok(Self { graph })
    }
}

impl LinearMap for Propagation {
    fn apply(&self, input: &Tensor) -> Result<Tensor> {
        self.graph.spmm(input)
    }

    fn adjoint(&self, grad_out: &Tensor) -> Tensor {
        self.graph.spmm(grad_out).expect("adjoint of a validated propagation")
    }
}
