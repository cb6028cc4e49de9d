//! Declarative experiment configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//!
//! [data]
//! source = "synthetic"
//! users = 6
//! sessions = 5
//! per_session = 100
//! separation = 2.0
//!
//! [split]
//! train = 300
//! val = 100
//! test = 100
//!
//! [[run]]
//! name = "ours"
//! encoder = "ours-pca"
//! detector = "svdd"
//! preprocess = "standardize"
//! ablation = "full"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::encoding::{EncoderKind, DEFAULT_SIZE};
use crate::pipeline::{Ablation, AeSettings, DetectorKind, PipelineConfig, SvddSettings};
use crate::preprocess::{ScalingKind, DEFAULT_CAPACITY};
use crate::sample::DEFAULT_PIN_LENGTH;
use crate::synth::SynthConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataSource {
    Synthetic(SynthConfig),
    Jsonl {
        path: PathBuf,
        #[serde(default = "default_pin_length")]
        pin_length: usize,
    },
}

fn default_pin_length() -> usize {
    DEFAULT_PIN_LENGTH
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train: 300,
            val: 100,
            test: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineDefaults {
    pub buffer: usize,
    pub augment: usize,
    pub image_size: usize,
}

impl Default for PipelineDefaults {
    fn default() -> Self {
        Self {
            buffer: DEFAULT_CAPACITY,
            augment: 2400,
            image_size: DEFAULT_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_encoder")]
    pub encoder: EncoderKind,
    #[serde(default)]
    pub detector: DetectorKind,
    #[serde(default)]
    pub preprocess: ScalingKind,
    #[serde(default)]
    pub ablation: Ablation,
}

fn default_encoder() -> EncoderKind {
    EncoderKind::OursPca
}

impl RunSpec {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            let head = match self.detector {
                DetectorKind::Svdd => self.encoder.name(),
                DetectorKind::Autoencoder => "autoencoder",
            };
            format!("{head}/{}/{}", scaling_name(self.preprocess), self.ablation)
        })
    }
}

pub fn scaling_name(s: ScalingKind) -> &'static str {
    match s {
        ScalingKind::Standardize => "standardize",
        ScalingKind::Minmax => "minmax",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub data: DataSource,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub pipeline: PipelineDefaults,
    #[serde(default)]
    pub svdd: SvddSettings,
    #[serde(default)]
    pub autoencoder: AeSettings,
    /// Restrict the experiment to these user ids.
    #[serde(default)]
    pub users: Option<Vec<String>>,
    #[serde(rename = "run")]
    pub runs: Vec<RunSpec>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, EvalError> {
        let cfg: Self = toml::from_str(text).map_err(|e| EvalError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load a config file; a relative JSONL path is resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let mut cfg = Self::from_toml(&std::fs::read_to_string(path)?)?;
        if let DataSource::Jsonl { path: data, .. } = &mut cfg.data {
            if data.is_relative() {
                if let Some(dir) = path.parent() {
                    *data = dir.join(&*data);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::Config(m.to_string()));
        if self.runs.is_empty() {
            return bad("at least one [[run]] is required");
        }
        if self.split.val == 0 || self.split.test == 0 {
            return bad("split.val and split.test must be positive");
        }
        if self.pipeline.buffer < 2 {
            return bad("pipeline.buffer must be at least 2");
        }
        if self.split.train < self.pipeline.buffer {
            return bad("split.train must be at least pipeline.buffer");
        }
        if self.pipeline.augment == 0 {
            return bad("pipeline.augment must be positive");
        }
        if self.pipeline.image_size < 16 {
            return bad("pipeline.image_size must be at least 16");
        }
        if self.svdd.epochs == 0 || self.autoencoder.epochs == 0 {
            return bad("epochs must be positive");
        }
        Ok(())
    }

    pub fn pipeline_for(&self, run: &RunSpec, user_index: usize) -> PipelineConfig {
        PipelineConfig {
            encoder: run.encoder,
            detector: run.detector,
            scaling: run.preprocess,
            ablation: run.ablation,
            buffer: self.pipeline.buffer,
            augment: self.pipeline.augment,
            image_size: self.pipeline.image_size,
            svdd: self.svdd,
            autoencoder: self.autoencoder,
            seed: self.seed ^ user_index as u64,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }
}
