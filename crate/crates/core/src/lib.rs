//! Keystroke-dynamics authentication: feature extraction, preprocessing, image
//! encodings, one-class models and evaluation.

pub mod encoding;
pub mod eval;
pub mod features;
pub mod neural;
pub mod pipeline;
pub mod preprocess;
pub mod sample;
pub mod synth;
