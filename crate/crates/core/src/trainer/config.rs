use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::env::{EnvConfig, FitnessConfig, RewardConfig};
use crate::error::{Error, Result};
use crate::models::FitConfig;
use crate::tensor::SeededRng;
use crate::td3::Td3Config;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RlConfig {
    pub steps: usize,
    pub updates_per_step: usize,
    pub episode_len: usize,
    pub inner_epochs: usize,
    pub inner_lr: f64,
    pub quantum: f64,
}

impl Default for RlConfig {
    fn default() -> Self {
        Self {
            steps: 5000,
            updates_per_step: 1,
            episode_len: 64,
            inner_epochs: 20,
            inner_lr: 0.2,
            quantum: 0.1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnnConfig {
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub alpha: f64,
    pub k_max: usize,
    pub layers: usize,
    pub hidden: usize,
}

impl Default for GnnConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 0.01,
            weight_decay: 5e-4,
            dropout: 0.5,
            alpha: 0.2,
            k_max: 8,
            layers: 2,
            hidden: 64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineToggles {
    pub gcn: bool,
    pub mlp: bool,
}

impl Default for BaselineToggles {
    fn default() -> Self {
        Self { gcn: true, mlp: true }
    }
}

/// Everything one end-to-end run needs. The agent's action bounds always
/// come from `gnn.k_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub rl: RlConfig,
    pub reward: RewardConfig,
    pub td3: Td3Config,
    pub gnn: GnnConfig,
    pub baselines: BaselineToggles,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            rl: RlConfig::default(),
            reward: RewardConfig::default(),
            td3: Td3Config::default(),
            gnn: GnnConfig::default(),
            baselines: BaselineToggles::default(),
        }
    }
}

/// Sub-stream tags; each phase draws from its own seed.
pub(crate) mod streams {
    pub const AGENT: u64 = 100;
    pub const ENV: u64 = 101;
    pub const MODEL_INIT: u64 = 102;
    pub const DROPOUT: u64 = 103;
    pub const FITNESS: u64 = 104;
}

fn as_uint(key: &str, v: &toml::Value) -> Result<u64> {
    match v {
        toml::Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(Error::invalid(format!("config key `{key}` expects a non-negative integer, got {v}"))),
    }
}

fn as_usize(key: &str, v: &toml::Value) -> Result<usize> {
    usize::try_from(as_uint(key, v)?).map_err(|_| Error::invalid(format!("config key `{key}` is too large")))
}

fn as_float(key: &str, v: &toml::Value) -> Result<f64> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::invalid(format!("config key `{key}` expects a number, got {v}"))),
    }
}

fn as_bool(key: &str, v: &toml::Value) -> Result<bool> {
    match v {
        toml::Value::Boolean(b) => Ok(*b),
        _ => Err(Error::invalid(format!("config key `{key}` expects true or false, got {v}"))),
    }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, toml::Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

impl TrainConfig {
    pub fn td3_config(&self) -> Td3Config {
        Td3Config {
            lo: 1.0,
            hi: self.gnn.k_max as f64,
            ..self.td3.clone()
        }
    }

    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            episode_len: self.rl.episode_len,
            reward: self.reward,
            fitness: FitnessConfig {
                epochs: self.rl.inner_epochs,
                lr: self.rl.inner_lr,
                alpha: self.gnn.alpha,
                quantum: self.rl.quantum,
                seed: self.stream_seed(streams::FITNESS),
            },
        }
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            epochs: self.gnn.epochs,
            lr: self.gnn.lr,
            weight_decay: self.gnn.weight_decay,
            seed: self.stream_seed(streams::DROPOUT),
        }
    }

    pub fn stream_seed(&self, tag: u64) -> u64 {
        SeededRng::new(self.seed).derive(tag).seed()
    }

    /// Sets one dotted key, checking only its type. Unknown keys fail.
    pub fn set(&mut self, key: &str, v: &toml::Value) -> Result<()> {
        match key {
            "seed" => self.seed = as_uint(key, v)?,
            "rl.steps" => self.rl.steps = as_usize(key, v)?,
            "rl.updates_per_step" => self.rl.updates_per_step = as_usize(key, v)?,
            "rl.episode_len" => self.rl.episode_len = as_usize(key, v)?,
            "rl.inner_epochs" => self.rl.inner_epochs = as_usize(key, v)?,
            "rl.inner_lr" => self.rl.inner_lr = as_float(key, v)?,
            "rl.quantum" => self.rl.quantum = as_float(key, v)?,
            "reward.scale" => self.reward.scale = as_float(key, v)?,
            "reward.window" => self.reward.window = as_usize(key, v)?,
            "td3.gamma" => self.td3.gamma = as_float(key, v)?,
            "td3.tau" => self.td3.tau = as_float(key, v)?,
            "td3.policy_delay" => self.td3.policy_delay = as_usize(key, v)?,
            "td3.exploration_noise" => self.td3.exploration_noise = as_float(key, v)?,
            "td3.target_noise" => self.td3.target_noise = as_float(key, v)?,
            "td3.noise_clip" => self.td3.noise_clip = as_float(key, v)?,
            "td3.batch_size" => self.td3.batch_size = as_usize(key, v)?,
            "td3.capacity" => self.td3.capacity = as_usize(key, v)?,
            "td3.hidden" => self.td3.hidden = as_usize(key, v)?,
            "td3.actor_lr" => self.td3.actor_lr = as_float(key, v)?,
            "td3.critic_lr" => self.td3.critic_lr = as_float(key, v)?,
            "gnn.epochs" => self.gnn.epochs = as_usize(key, v)?,
            "gnn.lr" => self.gnn.lr = as_float(key, v)?,
            "gnn.weight_decay" => self.gnn.weight_decay = as_float(key, v)?,
            "gnn.dropout" => self.gnn.dropout = as_float(key, v)?,
            "gnn.alpha" => self.gnn.alpha = as_float(key, v)?,
            "gnn.k_max" => self.gnn.k_max = as_usize(key, v)?,
            "gnn.layers" => self.gnn.layers = as_usize(key, v)?,
            "gnn.hidden" => self.gnn.hidden = as_usize(key, v)?,
            "baselines.gcn" => self.baselines.gcn = as_bool(key, v)?,
            "baselines.mlp" => self.baselines.mlp = as_bool(key, v)?,
            _ => return Err(Error::invalid(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Parses TOML (tables or dotted keys) over the defaults, then runs
    /// [`TrainConfig::validate`].
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::invalid(format!("config: {}", e.message())))?;
        let mut entries = Vec::new();
        flatten("", &table, &mut entries);
        let mut cfg = TrainConfig::default();
        for (k, v) in &entries {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        fn need(ok: bool, key: &str, what: &str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(format!("config key `{key}` {what}")))
            }
        }
        let positive = |x: f64| x > 0.0 && x.is_finite();
        need(self.rl.updates_per_step >= 1, "rl.updates_per_step", "must be at least 1")?;
        need(self.rl.episode_len >= 1, "rl.episode_len", "must be at least 1")?;
        need(self.rl.inner_epochs >= 1, "rl.inner_epochs", "must be at least 1")?;
        need(positive(self.rl.inner_lr), "rl.inner_lr", "must be positive")?;
        need(positive(self.rl.quantum) && self.rl.quantum <= 1.0, "rl.quantum", "must be in (0, 1]")?;
        need(positive(self.reward.scale), "reward.scale", "must be positive")?;
        need((0.0..1.0).contains(&self.td3.gamma), "td3.gamma", "must be in [0, 1)")?;
        need(self.td3.tau > 0.0 && self.td3.tau <= 1.0, "td3.tau", "must be in (0, 1]")?;
        need(self.td3.policy_delay >= 1, "td3.policy_delay", "must be at least 1")?;
        need(self.td3.exploration_noise >= 0.0, "td3.exploration_noise", "must be >= 0")?;
        need(self.td3.target_noise >= 0.0, "td3.target_noise", "must be >= 0")?;
        need(positive(self.td3.noise_clip), "td3.noise_clip", "must be positive")?;
        need(self.td3.capacity >= 1, "td3.capacity", "must be at least 1")?;
        need(
            self.td3.batch_size >= 1 && self.td3.batch_size <= self.td3.capacity,
            "td3.batch_size",
            "must be in 1..=td3.capacity",
        )?;
        need(self.td3.hidden >= 1, "td3.hidden", "must be at least 1")?;
        need(positive(self.td3.actor_lr), "td3.actor_lr", "must be positive")?;
        need(positive(self.td3.critic_lr), "td3.critic_lr", "must be positive")?;
        need(self.gnn.epochs >= 1, "gnn.epochs", "must be at least 1")?;
        need(positive(self.gnn.lr), "gnn.lr", "must be positive")?;
        need(self.gnn.weight_decay >= 0.0, "gnn.weight_decay", "must be >= 0")?;
        need((0.0..1.0).contains(&self.gnn.dropout), "gnn.dropout", "must be in [0, 1)")?;
        need((0.0..=1.0).contains(&self.gnn.alpha), "gnn.alpha", "must be in [0, 1]")?;
        need(self.gnn.k_max >= 2, "gnn.k_max", "must be at least 2")?;
        need(self.gnn.layers >= 1, "gnn.layers", "must be at least 1")?;
        need(self.gnn.hidden >= 1, "gnn.hidden", "must be at least 1")?;
        Ok(())
    }

    /// Flat `key → value` view, the inverse of [`TrainConfig::set`].
    pub fn dotted(&self) -> BTreeMap<String, serde_json::Value> {
        let pairs = [
            ("seed", json!(self.seed)),
            ("rl.steps", json!(self.rl.steps)),
            ("rl.updates_per_step", json!(self.rl.updates_per_step)),
            ("rl.episode_len", json!(self.rl.episode_len)),
            ("rl.inner_epochs", json!(self.rl.inner_epochs)),
            ("rl.inner_lr", json!(self.rl.inner_lr)),
            ("rl.quantum", json!(self.rl.quantum)),
            ("reward.scale", json!(self.reward.scale)),
            ("reward.window", json!(self.reward.window)),
            ("td3.gamma", json!(self.td3.gamma)),
            ("td3.tau", json!(self.td3.tau)),
            ("td3.policy_delay", json!(self.td3.policy_delay)),
            ("td3.exploration_noise", json!(self.td3.exploration_noise)),
            ("td3.target_noise", json!(self.td3.target_noise)),
            ("td3.noise_clip", json!(self.td3.noise_clip)),
            ("td3.batch_size", json!(self.td3.batch_size)),
            ("td3.capacity", json!(self.td3.capacity)),
            ("td3.hidden", json!(self.td3.hidden)),
            ("td3.actor_lr", json!(self.td3.actor_lr)),
            ("td3.critic_lr", json!(self.td3.critic_lr)),
            ("gnn.epochs", json!(self.gnn.epochs)),
            ("gnn.lr", json!(self.gnn.lr)),
            ("gnn.weight_decay", json!(self.gnn.weight_decay)),
            ("gnn.dropout", json!(self.gnn.dropout)),
            ("gnn.alpha", json!(self.gnn.alpha)),
            ("gnn.k_max", json!(self.gnn.k_max)),
            ("gnn.layers", json!(self.gnn.layers)),
            ("gnn.hidden", json!(self.gnn.hidden)),
            ("baselines.gcn", json!(self.baselines.gcn)),
            ("baselines.mlp", json!(self.baselines.mlp)),
        ];
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}
