use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_HOPS: f64 = 1.0;

/// Nearest-integer hop count; halves round away from zero (2.5 → 3).
pub fn round_hops(a: f64) -> usize {
    a.round() as usize
}

/// Per-node continuous hop granularity, each entry in `[1, k_max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionVector {
    values: Vec<f64>,
    k_max: usize,
}

impl ActionVector {
    pub fn new(values: Vec<f64>, k_max: usize) -> Result<Self> {
        if k_max < 1 {
            return Err(Error::invalid("k_max must be at least 1"));
        }
        for (i, &a) in values.iter().enumerate() {
            check_action(a, k_max).map_err(|e| Error::invalid(format!("node {i}: {e}")))?;
        }
        Ok(Self { values, k_max })
    }

    pub fn uniform(n: usize, a: f64, k_max: usize) -> Result<Self> {
        Self::new(vec![a; n], k_max)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn set(&mut self, i: usize, a: f64) -> Result<()> {
        check_action(a, self.k_max)?;
        self.values[i] = a;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Largest propagation power any node needs (`⟨a⟩ + 1`).
    pub fn required_depth(&self) -> usize {
        self.values.iter().map(|&a| round_hops(a) + 1).max().unwrap_or(1)
    }

    /// Relabels so that old node `i` becomes `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> ActionVector {
        let mut values = vec![0.0; self.values.len()];
        for (i, &a) in self.values.iter().enumerate() {
            values[perm[i]] = a;
        }
        ActionVector {
            values,
            k_max: self.k_max,
        }
    }
}

pub fn check_action(a: f64, k_max: usize) -> Result<()> {
    if !a.is_finite() || a < MIN_HOPS || a > k_max as f64 {
        return Err(Error::invalid(format!("action {a} outside [1, {k_max}]")));
    }
    Ok(())
}

/// How one node mixes propagation powers in the shared aggregator:
///
/// `Z_i = α H_i + mean_weight · Σ_{k=1..⟨a⟩} P_k[i]
///        + lower_frac · P_⟨a⟩[i] + upper_frac · P_{⟨a⟩+1}[i]`
///
/// where `mean_weight = (1-α)/⟨a⟩`, `lower_frac = a - ⌊a⌋` and
/// `upper_frac = ⌈a⌉ - a`. Both fractional weights are exactly `0.0` for
/// integer `a`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HopMix {
    pub rounded: usize,
    pub self_weight: f64,
    pub mean_weight: f64,
    pub lower_frac: f64,
    pub upper_frac: f64,
}

impl HopMix {
    pub fn new(a: f64, alpha: f64) -> Self {
        let rounded = round_hops(a);
        Self {
            rounded,
            self_weight: alpha,
            mean_weight: (1.0 - alpha) / rounded as f64,
            lower_frac: a - a.floor(),
            upper_frac: a.ceil() - a,
        }
    }

    /// Total weight on `P_k`, for `k >= 1`.
    pub fn coefficient(&self, k: usize) -> f64 {
        let mut c = if (1..=self.rounded).contains(&k) { self.mean_weight } else { 0.0 };
        if k == self.rounded {
            c += self.lower_frac;
        }
        if k == self.rounded + 1 {
            c += self.upper_frac;
        }
        c
    }

    pub fn depth(&self) -> usize {
        self.rounded + 1
    }
}
