use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::buffer::{Batch, ReplayBuffer};
use super::nets::{ActorNet, CriticNet, CriticPair, TargetNets};
use crate::error::{Error, Result};
use crate::tensor::{Adam, AdamConfig, Param, RngState, SeededRng, Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Td3Config {
    pub gamma: f64,
    pub tau: f64,
    pub policy_delay: usize,
    pub exploration_noise: f64,
    pub target_noise: f64,
    pub noise_clip: f64,
    pub batch_size: usize,
    pub capacity: usize,
    pub lo: f64,
    pub hi: f64,
    pub hidden: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
}

impl Default for Td3Config {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            policy_delay: 2,
            exploration_noise: 0.5,
            target_noise: 0.5,
            noise_clip: 1.0,
            batch_size: 128,
            capacity: 100_000,
            lo: 1.0,
            hi: 8.0,
            hidden: 64,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::invalid(format!("td3 config: {m}")));
        if !(0.0..1.0).contains(&self.gamma) {
            return fail(format!("gamma {} outside [0, 1)", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return fail(format!("tau {} outside (0, 1]", self.tau));
        }
        if self.policy_delay == 0 {
            return fail("policy_delay must be at least 1".into());
        }
        if !(self.noise_clip > 0.0) {
            return fail(format!("noise_clip {} must be positive", self.noise_clip));
        }
        if !(self.exploration_noise >= 0.0 && self.target_noise >= 0.0) {
            return fail("noise standard deviations must be non-negative".into());
        }
        if self.batch_size == 0 || self.batch_size > self.capacity {
            return fail(format!(
                "batch size {} must be in 1..={} (capacity)",
                self.batch_size, self.capacity
            ));
        }
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return fail(format!("action bounds [{}, {}] invalid", self.lo, self.hi));
        }
        if self.hidden == 0 {
            return fail("hidden width must be positive".into());
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return fail("learning rates must be positive".into());
        }
        Ok(())
    }
}

/// `clamp(actor(state) + N(0, noise_std²), lo, hi)`. No random draw is made
/// when `noise_std` is zero.
pub fn select_action(actor: &ActorNet, state: &[f64], noise_std: f64, rng: &mut SeededRng) -> Result<f64> {
    if state.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("state contains non-finite values"));
    }
    if !(noise_std >= 0.0) {
        return Err(Error::invalid(format!("noise std {noise_std} must be non-negative")));
    }
    let a = actor.act(state)?;
    if noise_std == 0.0 {
        return Ok(a);
    }
    Ok((a + noise_std * rng.normal()).clamp(actor.lo, actor.hi))
}

/// `r + γ · min(q1, q2)`.
pub fn bootstrap(reward: f64, gamma: f64, q1: f64, q2: f64) -> f64 {
    reward + gamma * q1.min(q2)
}

/// Target-actor actions for `next_states` with clipped Gaussian smoothing.
pub fn smoothed_target_actions(actor: &ActorNet, next_states: &Tensor, cfg: &Td3Config, rng: &mut SeededRng) -> Result<Vec<f64>> {
    let mut actions = actor.actions(next_states)?;
    for a in &mut actions {
        let eps = (cfg.target_noise * rng.normal()).clamp(-cfg.noise_clip, cfg.noise_clip);
        *a = (*a + eps).clamp(cfg.lo, cfg.hi);
    }
    Ok(actions)
}

/// Bootstrapped critic targets for a batch.
pub fn compute_target(batch: &Batch, targets: &TargetNets, cfg: &Td3Config, rng: &mut SeededRng) -> Result<Vec<f64>> {
    let next_actions = smoothed_target_actions(&targets.actor, &batch.next_states, cfg, rng)?;
    let q1 = targets.critics.q1.values(&batch.next_states, &next_actions, cfg.lo, cfg.hi)?;
    let q2 = targets.critics.q2.values(&batch.next_states, &next_actions, cfg.lo, cfg.hi)?;
    Ok(batch
        .rewards
        .iter()
        .zip(q1.iter().zip(&q2))
        .map(|(&r, (&a, &b))| bootstrap(r, cfg.gamma, a, b))
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub enum UpdateOutcome {
    /// Buffer below batch size; nothing changed.
    Skipped { size: usize, needed: usize },
    Updated {
        critic_losses: [f64; 2],
        actor_loss: Option<f64>,
    },
}

impl UpdateOutcome {
    pub fn is_update(&self) -> bool {
        matches!(self, UpdateOutcome::Updated { .. })
    }
}

fn grads_for(tape_grads: &crate::tensor::Gradients, vars: &[Var], params: &[Param]) -> Vec<Tensor> {
    vars.iter().zip(params).map(|(&v, p)| tape_grads.wrt(v, &p.value)).collect()
}

/// Actor, twin critics, their targets and optimizers.
#[derive(Clone, Debug)]
pub struct Td3Agent {
    pub config: Td3Config,
    pub actor: ActorNet,
    pub critics: CriticPair,
    pub targets: TargetNets,
    actor_opt: Adam,
    critic_opts: [Adam; 2],
    rng: SeededRng,
    updates: u64,
    actor_updates: u64,
}

const CHECKPOINT_FORMAT: &str = "grain-td3-checkpoint-v1";

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    config: Td3Config,
    actor: ActorNet,
    critics: CriticPair,
    targets: TargetNets,
    actor_opt: Adam,
    critic_opts: [Adam; 2],
    rng: RngState,
    updates: u64,
    actor_updates: u64,
}

impl Td3Agent {
    pub fn new(state_dim: usize, config: Td3Config, seed: u64) -> Result<Self> {
        config.validate()?;
        let root = SeededRng::new(seed);
        let actor = ActorNet::new(state_dim, config.hidden, config.lo, config.hi, &mut root.derive(10))?;
        let critics = CriticPair::new(state_dim, config.hidden, &mut root.derive(11), &mut root.derive(12))?;
        Ok(Self::assemble(config, actor, critics, root.derive(13)))
    }

    /// Agent around a given actor (critics still freshly initialized).
    pub fn with_actor(actor: ActorNet, config: Td3Config, seed: u64) -> Result<Self> {
        config.validate()?;
        let root = SeededRng::new(seed);
        let d = actor.state_dim();
        let critics = CriticPair::new(d, config.hidden, &mut root.derive(11), &mut root.derive(12))?;
        Ok(Self::assemble(config, actor, critics, root.derive(13)))
    }

    fn assemble(config: Td3Config, actor: ActorNet, critics: CriticPair, rng: SeededRng) -> Self {
        let targets = TargetNets::copy_of(&actor, &critics);
        let actor_opt = Adam::new(AdamConfig::with_lr(config.actor_lr), &actor.net.params);
        let critic_opts = [
            Adam::new(AdamConfig::with_lr(config.critic_lr), &critics.q1.net.params),
            Adam::new(AdamConfig::with_lr(config.critic_lr), &critics.q2.net.params),
        ];
        Self {
            config,
            actor,
            critics,
            targets,
            actor_opt,
            critic_opts,
            rng,
            updates: 0,
            actor_updates: 0,
        }
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn actor_updates(&self) -> u64 {
        self.actor_updates
    }

    /// Exploratory action using the agent's own random stream.
    pub fn explore(&mut self, state: &[f64]) -> Result<f64> {
        select_action(&self.actor, state, self.config.exploration_noise, &mut self.rng)
    }

    /// One critic step, plus an actor step and target refresh every
    /// `policy_delay` calls.
    pub fn update(&mut self, buffer: &ReplayBuffer) -> Result<UpdateOutcome> {
        let needed = self.config.batch_size;
        if buffer.len() < needed {
            return Ok(UpdateOutcome::Skipped {
                size: buffer.len(),
                needed,
            });
        }
        let batch = buffer.sample(needed, &mut self.rng)?;
        let y = compute_target(&batch, &self.targets, &self.config, &mut self.rng)?;
        let y = Tensor::matrix(y.len(), 1, y)?;
        let inputs = CriticNet::inputs(&batch.states, &batch.actions, self.config.lo, self.config.hi)?;

        let mut critic_losses = [0.0; 2];
        let critics = [&mut self.critics.q1, &mut self.critics.q2];
        for ((critic, opt), loss_out) in critics.into_iter().zip(&mut self.critic_opts).zip(&mut critic_losses) {
            let mut tape = Tape::new();
            let vars = critic.net.leaves(&mut tape);
            let x = tape.leaf(inputs.clone());
            let q = critic.net.forward_tape(&mut tape, x, &vars)?;
            let target = tape.leaf(y.clone());
            let loss = tape.mse(q, target)?;
            *loss_out = tape.value(loss).item();
            let grads = grads_for(&tape.backward(loss)?, &vars, &critic.net.params);
            opt.step(&mut critic.net.params.iter_mut().collect::<Vec<_>>(), &grads)?;
        }
        self.updates += 1;

        let mut actor_loss = None;
        if self.updates % self.config.policy_delay as u64 == 0 {
            actor_loss = Some(self.actor_step(&batch.states)?);
            self.targets.soft_update(&self.actor, &self.critics, self.config.tau);
            self.actor_updates += 1;
        }
        Ok(UpdateOutcome::Updated {
            critic_losses,
            actor_loss,
        })
    }

    /// Ascends `mean Q1(s, π(s))`; critic weights enter the tape as
    /// constants and are never stepped.
    fn actor_step(&mut self, states: &Tensor) -> Result<f64> {
        let (lo, hi) = (self.config.lo, self.config.hi);
        let mut tape = Tape::new();
        let actor_vars = self.actor.net.leaves(&mut tape);
        let critic_vars = self.critics.q1.net.leaves(&mut tape);
        let s = tape.leaf(states.clone());
        let a = self.actor.forward_tape(&mut tape, s, &actor_vars)?;
        let a = tape.shift(a, -lo);
        let a = tape.scale(a, 2.0 / (hi - lo));
        let a = tape.shift(a, -1.0);
        let x = tape.concat_cols(s, a)?;
        let q = self.critics.q1.net.forward_tape(&mut tape, x, &critic_vars)?;
        let q = tape.mean(q);
        let loss = tape.scale(q, -1.0);
        let value = tape.value(loss).item();
        let grads = grads_for(&tape.backward(loss)?, &actor_vars, &self.actor.net.params);
        self.actor_opt
            .step(&mut self.actor.net.params.iter_mut().collect::<Vec<_>>(), &grads)?;
        Ok(value)
    }

    pub fn to_json(&self) -> Result<String> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            config: self.config.clone(),
            actor: self.actor.clone(),
            critics: self.critics.clone(),
            targets: self.targets.clone(),
            actor_opt: self.actor_opt.clone(),
            critic_opts: self.critic_opts.clone(),
            rng: self.rng.state(),
            updates: self.updates,
            actor_updates: self.actor_updates,
        };
        Ok(serde_json::to_string_pretty(&ck)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::invalid(format!("unknown checkpoint format `{}`", ck.format)));
        }
        ck.config.validate()?;
        Ok(Self {
            config: ck.config,
            actor: ck.actor,
            critics: ck.critics,
            targets: ck.targets,
            actor_opt: ck.actor_opt,
            critic_opts: ck.critic_opts,
            rng: SeededRng::from_state(&ck.rng)?,
            updates: ck.updates,
            actor_updates: ck.actor_updates,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::td3::Transition;

    fn filled(n: usize, d: usize) -> ReplayBuffer {
        let mut b = ReplayBuffer::new(1000).unwrap();
        let mut rng = SeededRng::new(5);
        for _ in 0..n {
            let s: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            b.push(Transition {
                state: Arc::from(s.clone()),
                action: rng.uniform_range(1.0, 8.0),
                reward: rng.normal(),
                next_state: Arc::from(s),
            });
        }
        b
    }

    fn small_config() -> Td3Config {
        Td3Config {
            batch_size: 8,
            hidden: 8,
            ..Td3Config::default()
        }
    }

    #[test]
    fn underfull_buffer_is_a_distinct_noop() {
        let mut agent = Td3Agent::new(2, small_config(), 0).unwrap();
        let before = agent.actor.clone();
        let out = agent.update(&filled(7, 2)).unwrap();
        assert_eq!(out, UpdateOutcome::Skipped { size: 7, needed: 8 });
        assert_eq!(agent.actor, before);
        assert_eq!(agent.updates(), 0);
    }

    #[test]
    fn actor_updates_follow_policy_delay() {
        let mut agent = Td3Agent::new(2, small_config(), 0).unwrap();
        let buf = filled(20, 2);
        for _ in 0..4 {
            assert!(agent.update(&buf).unwrap().is_update());
        }
        assert_eq!(agent.actor_updates(), 2);
    }

    #[test]
    fn critics_start_different() {
        let agent = Td3Agent::new(3, small_config(), 0).unwrap();
        assert_ne!(agent.critics.q1, agent.critics.q2);
        assert_eq!(agent.targets.critics, agent.critics);
    }

    #[test]
    fn checkpoint_round_trips() {
        let mut agent = Td3Agent::new(2, small_config(), 3).unwrap();
        let buf = filled(20, 2);
        for _ in 0..3 {
            agent.update(&buf).unwrap();
        }
        let a = agent.to_json().unwrap();
        let b = Td3Agent::from_json(&a).unwrap().to_json().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_ranges_checked() {
        assert!(Td3Config { gamma: 1.0, ..Td3Config::default() }.validate().is_err());
        assert!(Td3Config { tau: 0.0, ..Td3Config::default() }.validate().is_err());
        assert!(Td3Config { policy_delay: 0, ..Td3Config::default() }.validate().is_err());
        assert!(Td3Config { batch_size: 10, capacity: 5, ..Td3Config::default() }.validate().is_err());
    }
}
