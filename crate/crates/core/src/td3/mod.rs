//! Twin-delayed deterministic policy gradient over a bounded scalar action.

mod agent;
mod buffer;
mod nets;

pub use agent::{
    bootstrap, compute_target, select_action, smoothed_target_actions, Td3Agent, Td3Config, UpdateOutcome,
};
pub use buffer::{Batch, ReplayBuffer, Transition};
pub use nets::{normalize_action, ActorNet, CriticNet, CriticPair, Mlp, TargetNets};
