//! Dense `f64` tensors with reverse-mode differentiation over a dynamic tape.

mod gemm;
mod gradcheck;
mod ops;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, relative_error, GradCheckReport, DEFAULT_STEP};
pub use ops::{gelu, gelu_grad};
pub use params::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CheckpointError, Param, ParamSet,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use tape::{Backward, Gradients, Tape, Var};
pub use tensor::Tensor;

pub(crate) use gemm::gemm;

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("variable is not attached to this tape or does not require grad")]
    Detached,
    #[error("backward needs a one-element loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("forward pass is not deterministic: {first} then {second}")]
    NonDeterministic { first: f64, second: f64 },
    #[error("{0}")]
    Invalid(String),
}
