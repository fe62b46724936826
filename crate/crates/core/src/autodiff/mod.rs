//! Dense tensors, reverse-mode differentiation, Adam, and a finite-difference
//! gradient checker.

mod adam;
mod gradcheck;
mod graph;
mod tensor;

pub use adam::{AdamConfig, AdamState, StepDecay};
pub use gradcheck::{finite_diff_check, RELATIVE_FLOOR};
pub use graph::{Gradients, Graph, Var};
pub use tensor::Tensor;
