//! Small-scale neural network repair: a CPU training engine, a model
//! container format, dataset loaders and corruptions, evaluation metrics,
//! three repair families and an experiment runner.

pub mod constraint;
mod container;
pub mod data;
pub mod error;
pub mod eval;
pub mod monitor;
pub mod nn;
pub mod orchestrator;
pub mod repair;
pub mod rng;
pub mod store;
pub mod tensor;

pub use constraint::{constraint_loss, ConstraintSpec};
pub use data::{LabeledDataset, Split};
pub use error::{Error, Result};
pub use store::Model;
pub use tensor::Tensor;
