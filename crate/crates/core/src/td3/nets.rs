use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Param, SeededRng, Tape, Tensor, Var};

const OUTPUT_INIT: f64 = 3e-3;

/// Fully connected relu network with biases and a linear output layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    /// Alternating weight `(in × out)` and bias `(1 × out)` per layer.
    pub params: Vec<Param>,
}

impl Mlp {
    /// Uniform `±1/sqrt(fan_in)` init for hidden layers and `±3e-3` for the
    /// output layer, so initial outputs sit near zero.
    pub fn new(widths: &[usize], rng: &mut SeededRng) -> Result<Self> {
        let last = widths.len().saturating_sub(2);
        let mut layer = 0;
        let mut calls = 0;
        Self::build(widths, |fan_in, len| {
            let bound = if layer == last { OUTPUT_INIT } else { 1.0 / (fan_in as f64).sqrt() };
            calls += 1;
            if calls % 2 == 0 {
                layer += 1;
            }
            (0..len).map(|_| rng.uniform_range(-bound, bound)).collect()
        })
    }

    pub fn zeros(widths: &[usize]) -> Result<Self> {
        Self::build(widths, |_, len| vec![0.0; len])
    }

    fn build(widths: &[usize], mut init: impl FnMut(usize, usize) -> Vec<f64>) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::invalid(format!("network widths {widths:?} need at least two positive entries")));
        }
        let mut params = Vec::with_capacity(2 * (widths.len() - 1));
        for (l, w) in widths.windows(2).enumerate() {
            let weight = Tensor::matrix(w[0], w[1], init(w[0], w[0] * w[1]))?;
            let bias = Tensor::matrix(1, w[1], init(w[0], w[1]))?;
            params.push(Param::new(format!("w{}", l + 1), weight));
            params.push(Param::new(format!("b{}", l + 1), bias));
        }
        Ok(Self { params })
    }

    pub fn input_dim(&self) -> usize {
        self.params[0].value.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.params[self.params.len() - 1].value.cols()
    }

    pub fn leaves(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.iter().map(|p| tape.leaf(p.value.clone())).collect()
    }

    pub fn forward_tape(&self, tape: &mut Tape, input: Var, vars: &[Var]) -> Result<Var> {
        let layers = vars.len() / 2;
        let mut h = input;
        for l in 0..layers {
            h = tape.matmul(h, vars[2 * l])?;
            h = tape.add_row(h, vars[2 * l + 1])?;
            if l + 1 < layers {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }

    /// Batch inference without recording a tape.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let layers = self.params.len() / 2;
        let mut h = input.clone();
        for l in 0..layers {
            h = h.matmul(&self.params[2 * l].value)?;
            let bias = self.params[2 * l + 1].value.data();
            let cols = h.cols();
            for (j, x) in h.data_mut().iter_mut().enumerate() {
                *x += bias[j % cols];
            }
            if l + 1 < layers {
                h = h.map(|x| x.max(0.0));
            }
        }
        Ok(h)
    }

    /// Polyak step `self ← τ·online + (1-τ)·self`.
    pub fn soft_update(&mut self, online: &Mlp, tau: f64) {
        for (t, o) in self.params.iter_mut().zip(&online.params) {
            for (x, &y) in t.value.data_mut().iter_mut().zip(o.value.data()) {
                *x = tau * y + (1.0 - tau) * *x;
            }
        }
    }
}

/// Deterministic policy `a = lo + (hi-lo)(tanh(u)+1)/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActorNet {
    pub net: Mlp,
    pub lo: f64,
    pub hi: f64,
}

impl ActorNet {
    pub fn new(state_dim: usize, hidden: usize, lo: f64, hi: f64, rng: &mut SeededRng) -> Result<Self> {
        check_bounds(lo, hi)?;
        Ok(Self {
            net: Mlp::new(&[state_dim, hidden, hidden, 1], rng)?,
            lo,
            hi,
        })
    }

    pub fn zeros(state_dim: usize, hidden: usize, lo: f64, hi: f64) -> Result<Self> {
        check_bounds(lo, hi)?;
        Ok(Self {
            net: Mlp::zeros(&[state_dim, hidden, hidden, 1])?,
            lo,
            hi,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.net.input_dim()
    }

    fn squash(&self, u: f64) -> f64 {
        let a = self.lo + (self.hi - self.lo) * ((u.tanh() + 1.0) / 2.0);
        a.clamp(self.lo, self.hi)
    }

    /// One action per row of `states`.
    pub fn actions(&self, states: &Tensor) -> Result<Vec<f64>> {
        Ok(self.net.forward(states)?.data().iter().map(|&u| self.squash(u)).collect())
    }

    pub fn act(&self, state: &[f64]) -> Result<f64> {
        if state.len() != self.state_dim() {
            return Err(Error::invalid(format!(
                "state has {} entries, actor expects {}",
                state.len(),
                self.state_dim()
            )));
        }
        let x = Tensor::matrix(1, state.len(), state.to_vec())?;
        Ok(self.actions(&x)?[0])
    }

    pub fn forward_tape(&self, tape: &mut Tape, states: Var, vars: &[Var]) -> Result<Var> {
        let u = self.net.forward_tape(tape, states, vars)?;
        let t = tape.tanh(u);
        let t = tape.shift(t, 1.0);
        let t = tape.scale(t, (self.hi - self.lo) / 2.0);
        Ok(tape.shift(t, self.lo))
    }
}

fn check_bounds(lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::invalid(format!("action bounds [{lo}, {hi}] must be finite with lo < hi")));
    }
    Ok(())
}

/// Maps an action from `[lo, hi]` to `[-1, 1]` before it enters a critic.
pub fn normalize_action(a: f64, lo: f64, hi: f64) -> f64 {
    2.0 * (a - lo) / (hi - lo) - 1.0
}

/// `Q(s, a)` over `concat(state, normalized action)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticNet {
    pub net: Mlp,
}

impl CriticNet {
    pub fn new(state_dim: usize, hidden: usize, rng: &mut SeededRng) -> Result<Self> {
        Ok(Self {
            net: Mlp::new(&[state_dim + 1, hidden, hidden, 1], rng)?,
        })
    }

    /// Builds the critic input matrix from states and raw actions.
    pub fn inputs(states: &Tensor, actions: &[f64], lo: f64, hi: f64) -> Result<Tensor> {
        if states.rows() != actions.len() {
            return Err(Error::invalid(format!("{} states for {} actions", states.rows(), actions.len())));
        }
        let d = states.cols();
        let mut data = Vec::with_capacity(states.rows() * (d + 1));
        for (i, &a) in actions.iter().enumerate() {
            data.extend_from_slice(states.row(i));
            data.push(normalize_action(a, lo, hi));
        }
        Tensor::matrix(states.rows(), d + 1, data)
    }

    pub fn values(&self, states: &Tensor, actions: &[f64], lo: f64, hi: f64) -> Result<Vec<f64>> {
        Ok(self.net.forward(&Self::inputs(states, actions, lo, hi)?)?.into_data())
    }
}

/// Two critics with independently drawn initial weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticPair {
    pub q1: CriticNet,
    pub q2: CriticNet,
}

impl CriticPair {
    pub fn new(state_dim: usize, hidden: usize, rng1: &mut SeededRng, rng2: &mut SeededRng) -> Result<Self> {
        Ok(Self {
            q1: CriticNet::new(state_dim, hidden, rng1)?,
            q2: CriticNet::new(state_dim, hidden, rng2)?,
        })
    }
}

/// Lagged copies of the actor and both critics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetNets {
    pub actor: ActorNet,
    pub critics: CriticPair,
}

impl TargetNets {
    pub fn copy_of(actor: &ActorNet, critics: &CriticPair) -> Self {
        Self {
            actor: actor.clone(),
            critics: critics.clone(),
        }
    }

    pub fn soft_update(&mut self, actor: &ActorNet, critics: &CriticPair, tau: f64) {
        self.actor.net.soft_update(&actor.net, tau);
        self.critics.q1.net.soft_update(&critics.q1.net, tau);
        self.critics.q2.net.soft_update(&critics.q2.net, tau);
    }
}
