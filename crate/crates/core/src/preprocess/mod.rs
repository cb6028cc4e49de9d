//! Scaling, the weighted sample buffer, and combinatorial augmentation.

mod augment;
mod buffer;
pub mod matrix_file;
mod scaler;

use thiserror::Error;

pub use augment::{augment, binomial, sample_subsets};
pub use buffer::{buffer_weights, weighted_mean, SampleBuffer, DEFAULT_CAPACITY};
pub use scaler::{MinMaxScaler, Scaler, ScalingKind, Standardizer, DEFAULT_EPSILON};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PreprocessError {
    #[error("insufficient data: need at least {needed} vectors, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("buffer not ready: {have} of {need} inputs")]
    NotReady { have: usize, need: usize },
    #[error("buffer capacity must be at least 2, got {0}")]
    BadCapacity(usize),
    #[error("requested {requested} combinations but only {maximum} exist")]
    TooManyCombinations { requested: usize, maximum: u128 },
}
