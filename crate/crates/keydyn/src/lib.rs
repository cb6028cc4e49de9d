//! Enrollment store, model artifacts and HTTP service around `keydyn-core`.

pub mod artifacts;
pub mod export;
pub mod service;
pub mod training;
