//! Dense tensors, a reverse-mode tape, Adam, seeded randomness and a
//! finite-difference gradient checker.

mod adam;
mod dense;
mod gradcheck;
mod rng;
pub mod suite;
mod tape;

pub use adam::{adam_step, Adam, AdamConfig, AdamState, Param};
pub use dense::Tensor;
pub use gradcheck::grad_check;
pub use rng::{RngState, SeededRng};
pub use tape::{Gradients, LinearMap, Tape, Var};
