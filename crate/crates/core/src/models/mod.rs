//! Hop-granular aggregation, baseline classifiers and their training loop.

mod actions;
mod classifier;
mod combine;
mod fit;

pub use actions::{check_action, round_hops, ActionVector, HopMix, MIN_HOPS};
pub use classifier::{
    glorot_uniform, model_forward, BaselineInputs, BaselineKind, BaselineModel, Forward, GranularInputs, GranularModel,
    NodeClassifier,
};
pub use combine::{combine_node, granular_combine, reference_aggregate, GranularPropagation};
pub use fit::{accuracy, argmax_rows, fit_and_score, FitConfig, FitOutcome};
