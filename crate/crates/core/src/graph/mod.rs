//! Graph storage, propagation and datasets.

mod csr;
mod dataset;
mod propagation;
mod synth;

pub use csr::CsrGraph;
pub use dataset::{LabeledDataset, SplitSource, Splits, TRAIN_FRACTION, VAL_FRACTION};
pub use propagation::{Propagation, PropagationCache};
pub use synth::{generate_synthetic, SynthConfig};
