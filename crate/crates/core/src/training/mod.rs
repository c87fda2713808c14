//! Relative-ℓ² training of the operator models: loss, AdamW, plateau
//! schedule, the epoch loop and evaluation statistics.

mod eval;
mod loss;
mod optim;
mod train;

pub use eval::{evaluate, Evaluation, HISTOGRAM_BINS, HISTOGRAM_MAX, HISTOGRAM_WIDTH};
pub use loss::{per_sample_relative_l2, relative_l2, relative_l2_loss};
pub use optim::{AdamW, Plateau, ADAM_EPS, BETA1, BETA2};
pub use train::{train, EpochEvent, EpochRecord, History, TrainConfig, TrainOutcome};

use crate::autodiff::TensorError;
use crate::models::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("target {0} has zero norm")]
    ZeroNormTarget(usize),
    #[error("non-finite gradient for {param} at index {index}")]
    NonFiniteGradient { param: String, index: usize },
    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize, loss: f64 },
    #[error("non-finite test loss {loss} at epoch {epoch}")]
    NonFiniteTestLoss { epoch: usize, loss: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Callback(String),
}
