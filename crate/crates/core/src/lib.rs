//! GRAIN: node classification with a learned per-node hop granularity.
//!
//! The crate is organized bottom-up:
//!
//! - [`tensor`]: dense tensors, reverse-mode tape, Adam, seeded RNG.
//! - [`graph`]: CSR graphs, normalized propagation, neighborhoods, homophily
//!   and a synthetic generator.
//! - [`models`]: the granular multi-view aggregator plus GCN/MLP baselines.
//! - [`td3`]: twin-delayed actor-critic agent over a 1-D action.
//! - [`env`]: the hop-granularity decision process and its fitness evaluator.
//! - [`trainer`]: end-to-end pipeline and metrics report.
//! - [`io`]: dataset directories, citation-format conversion, config files.

pub mod env;
pub mod error;
pub mod graph;
pub mod io;
pub mod models;
pub mod td3;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
