use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::fitness::{FitnessConfig, FitnessEvaluator};
use super::reward::{compute_reward, RewardConfig};
use crate::error::{Error, Result};
use crate::graph::{LabeledDataset, PropagationCache};
use crate::models::{check_action, round_hops, ActionVector};
use crate::tensor::SeededRng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub episode_len: usize,
    pub reward: RewardConfig,
    pub fitness: FitnessConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            episode_len: 64,
            reward: RewardConfig::default(),
            fitness: FitnessConfig::default(),
        }
    }
}

/// Current node, step index and fitness history of an episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    pub node: usize,
    pub t: usize,
    pub history: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub next_state: Arc<[f64]>,
    pub next_node: usize,
    pub reward: f64,
    pub fitness: f64,
    /// Episode length reached; call `reset` before stepping again.
    pub done: bool,
}

/// Walks the graph choosing a hop granularity per visited node.
#[derive(Debug)]
pub struct GranularityEnv {
    dataset: Arc<LabeledDataset>,
    evaluator: FitnessEvaluator,
    cfg: EnvConfig,
    rng: SeededRng,
    state: EnvState,
}

impl GranularityEnv {
    pub fn new(dataset: Arc<LabeledDataset>, cache: Arc<PropagationCache>, cfg: EnvConfig, seed: u64) -> Result<Self> {
        cfg.reward.validate()?;
        if cfg.episode_len == 0 {
            return Err(Error::invalid("episode length must be positive"));
        }
        if dataset.splits.train.is_empty() {
            return Err(Error::invalid("environment needs a nonempty train split"));
        }
        let evaluator = FitnessEvaluator::new(Arc::clone(&dataset), cache, cfg.fitness)?;
        Ok(Self {
            dataset,
            evaluator,
            cfg,
            rng: SeededRng::new(seed),
            state: EnvState {
                node: 0,
                t: 0,
                history: Vec::new(),
            },
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn evaluator(&self) -> &FitnessEvaluator {
        &self.evaluator
    }

    pub fn k_max(&self) -> usize {
        self.evaluator.k_max()
    }

    pub fn set_policy_snapshot(&mut self, actions: ActionVector) -> Result<()> {
        self.evaluator.set_snapshot(actions)
    }

    fn features_of(&self, v: usize) -> Arc<[f64]> {
        Arc::from(self.dataset.features.row(v))
    }

    fn random_train_node(&mut self) -> usize {
        let train = &self.dataset.splits.train;
        train[self.rng.below(train.len())]
    }

    /// Starts an episode at a uniformly drawn training node.
    pub fn reset(&mut self) -> Arc<[f64]> {
        let node = self.random_train_node();
        self.state = EnvState {
            node,
            t: 0,
            history: Vec::new(),
        };
        self.features_of(node)
    }

    pub fn step(&mut self, a: f64) -> Result<StepResult> {
        check_action(a, self.k_max())?;
        let v = self.state.node;
        let fitness = self.evaluator.fitness(v, a)?;
        self.state.history.push(fitness);
        let reward = compute_reward(&self.state.history, &self.cfg.reward)?;
        let hood = self.dataset.graph.khop_neighborhood(v, round_hops(a));
        let next = if hood.is_empty() {
            self.random_train_node()
        } else {
            hood[self.rng.below(hood.len())]
        };
        self.state.node = next;
        self.state.t += 1;
        Ok(StepResult {
            next_state: self.features_of(next),
            next_node: next,
            reward,
            fitness,
            done: self.state.t >= self.cfg.episode_len,
        })
    }
}
