//! Error rates, EER calibration and the per-user experiment harness.

pub mod config;
pub mod experiment;
pub mod metrics;
pub mod report;

use thiserror::Error;

pub use config::{DataSource, ExperimentConfig, RunSpec, SplitConfig};
pub use experiment::{load_dataset, run_experiment, run_on_dataset, run_single, score_split, Dataset, UserVectors};
pub use metrics::{compute_eer, compute_metrics, sweep, EerResult, Metrics, ScoredSet, SweepPoint};
pub use report::{ExperimentReport, RunReport, Summary, UserOutcome, UserResult};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("both genuine and imposter scores are required")]
    EmptyClass,
    #[error("scores must be finite")]
    NonFiniteScore,
    #[error("invalid config: {0}")]
    Config(String),
    #[error("dataset: {0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
