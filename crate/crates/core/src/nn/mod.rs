//! Small fully connected networks in double precision.
//!
//! An [`Mlp`] owns one flat parameter vector. For each layer `l` mapping
//! `n_l -> n_{l+1}` units, the vector holds the `n_{l+1} x n_l` weight matrix
//! in row-major order followed by the `n_{l+1}` biases. Hidden layers share
//! one activation; the output layer is linear.

mod adam;
mod checkpoint;
mod gradcheck;
mod mlp;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use checkpoint::{load_weights, save_weights, CheckpointError, CHECKPOINT_MAGIC};
pub use gradcheck::{grad_check, grad_check_against, GradCheckReport, GRAD_CHECK_TOL};
pub use mlp::{Activation, BatchLoss, Mlp, Regression};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("input has {got} features, network expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("parameter vector has {got} entries, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid network shape: {0}")]
    InvalidShape(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("learning rate must be positive, got {0}")]
    InvalidLearningRate(f64),
}
