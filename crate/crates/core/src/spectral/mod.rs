//! Real FFT, Daubechies DWT and the kernel layers built on them.

mod conv;
mod fft;
mod filters;
mod wavelet;

pub use conv::{spectral_conv, wavelet_conv};
pub use fft::{fft_adjoint_check, irfft, rfft, spectrum_len, Spectrum};
pub use filters::{WaveletFilter, SUPPORTED_ORDERS};
pub use wavelet::{coarse_len, dwt, dwt_step, idwt, idwt_step, level_lengths, WaveletPlan, WaveletPyramid};

use crate::autodiff::TensorError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectralError {
    #[error("no Daubechies table for order {0} (supported: 1, 2, 4, 6, 8, 16, 24)")]
    UnsupportedOrder(usize),
    #[error("db{order} filter failed validation: {what}")]
    InvalidFilter { order: usize, what: String },
    #[error("length mismatch: expected {expected}, found {found}")]
    Length { expected: usize, found: usize },
    #[error("at least one decomposition level is required")]
    ZeroLevels,
    #[error("{levels} levels on length {n} leave {coarse} coarse coefficients, fewer than the filter length {filter_len}")]
    TooManyLevels {
        n: usize,
        levels: usize,
        coarse: usize,
        filter_len: usize,
    },
    #[error("k_max = {k_max} outside 1..={max}")]
    Modes { k_max: usize, max: usize },
    #[error("{op}: expected weight shape {expected:?}, found {found:?}")]
    Shape {
        op: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}
