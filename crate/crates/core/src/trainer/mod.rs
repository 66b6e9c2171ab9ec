//! End-to-end pipeline: explore with the agent, freeze its policy, train the
//! granular classifier on the derived actions, compare against baselines.

mod config;
mod pipeline;
mod report;

pub use config::{BaselineToggles, GnnConfig, RlConfig, TrainConfig};
pub use pipeline::{
    build_cache, derive_actions, run_baseline, run_baselines, run_gnn_phase, run_pipeline, run_rl_phase,
    PipelineOutcome, RlOutcome, StepLog,
};
pub use report::{emit_report, pca_2d, read_report, write_embedding, ActionStats, Curves, MetricsReport, PhaseMetrics};
