use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tensor::{SeededRng, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Arc<[f64]>,
    pub action: f64,
    pub reward: f64,
    pub next_state: Arc<[f64]>,
}

/// Fixed-capacity ring of transitions; the oldest entry is overwritten
/// once full.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    cursor: usize,
}

/// Column-stacked view of a sampled batch.
#[derive(Clone, Debug)]
pub struct Batch {
    pub states: Tensor,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_states: Tensor,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("replay capacity must be positive"));
        }
        Ok(Self {
            capacity,
            items: Vec::new(),
            cursor: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Live entries in storage order (not insertion order once wrapped).
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Uniform indices with replacement over live entries.
    pub fn sample_indices(&self, batch: usize, rng: &mut SeededRng) -> Result<Vec<usize>> {
        if self.items.is_empty() {
            return Err(Error::invalid("cannot sample from an empty replay buffer"));
        }
        Ok((0..batch).map(|_| rng.below(self.items.len())).collect())
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }

    pub fn sample(&self, batch: usize, rng: &mut SeededRng) -> Result<Batch> {
        let idx = self.sample_indices(batch, rng)?;
        self.gather(&idx)
    }

    pub fn gather(&self, idx: &[usize]) -> Result<Batch> {
        let d = self.items[idx[0]].state.len();
        let mut states = Vec::with_capacity(idx.len() * d);
        let mut next = Vec::with_capacity(idx.len() * d);
        let mut actions = Vec::with_capacity(idx.len());
        let mut rewards = Vec::with_capacity(idx.len());
        for &i in idx {
            let t = &self.items[i];
            if t.state.len() != d || t.next_state.len() != d {
                return Err(Error::invalid("replay buffer holds states of different widths"));
            }
            states.extend_from_slice(&t.state);
            next.extend_from_slice(&t.next_state);
            actions.push(t.action);
            rewards.push(t.reward);
        }
        Ok(Batch {
            states: Tensor::matrix(idx.len(), d, states)?,
            actions,
            rewards,
            next_states: Tensor::matrix(idx.len(), d, next)?,
        })
    }
}
