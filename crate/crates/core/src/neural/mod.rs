//! Small CPU neural networks: the Deep SVDD image model and the dense
//! autoencoder baseline, with hand-written backpropagation and Adam.

pub mod adam;
pub mod autoencoder;
pub mod io;
pub mod layers;
pub mod svdd;
pub mod tensor;

use thiserror::Error;

pub use adam::{Adam, AdamConfig};
pub use autoencoder::{AeOptions, AutoencoderModel};
pub use svdd::{Decision, SvddArch, SvddModel, SvddNetwork, TrainOptions, TrainReport, Verdict};
pub use tensor::Tensor;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("input has {actual} values, expected {expected}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("no training inputs")]
    EmptyInput,
    #[error("center has not been initialized")]
    MissingCenter,
    #[error("model has no threshold")]
    Uncalibrated,
    #[error("non-finite loss at epoch {epoch}, batch {batch} (epoch losses so far: {history:?})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        history: Vec<f64>,
    },
    #[error("malformed model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
