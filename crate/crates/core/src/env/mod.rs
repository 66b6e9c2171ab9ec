//! The hop-granularity decision process: states are node feature rows,
//! actions are continuous hop counts, rewards are windowed fitness gains.

mod fitness;
mod mdp;
mod reward;

pub use fitness::{FitnessConfig, FitnessEvaluator};
pub use mdp::{EnvConfig, EnvState, GranularityEnv, StepResult};
pub use reward::{compute_reward, RewardConfig};
