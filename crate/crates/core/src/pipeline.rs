//! Per-user training and scoring: scale, buffer, encode, detect.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{CanvasConfig, EncodedImage, EncoderKind, EncodingError, ImageEncoder, DEFAULT_SIZE};
use crate::features::{FeatureLayout, SlotKind};
use crate::neural::svdd::DEFAULT_WEIGHT_DECAY;
use crate::neural::{AeOptions, AutoencoderModel, NeuralError, SvddArch, SvddModel, TrainOptions, TrainReport};
use crate::preprocess::{augment, weighted_mean, PreprocessError, Scaler, ScalingKind};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    #[default]
    Svdd,
    Autoencoder,
}

impl DetectorKind {
    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Svdd => "svdd",
            DetectorKind::Autoencoder => "autoencoder",
        }
    }
}

impl FromStr for DetectorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "svdd" => Ok(DetectorKind::Svdd),
            "autoencoder" | "ae" => Ok(DetectorKind::Autoencoder),
            _ => Err(format!("unknown detector {s:?}")),
        }
    }
}

/// Feature groups withheld from the detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Ablation {
    #[default]
    #[serde(rename = "full")]
    Full,
    #[serde(rename = "-location", alias = "no-location")]
    NoLocation,
    #[serde(rename = "-timing", alias = "no-timing")]
    NoTiming,
}

impl Ablation {
    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoLocation => "-location",
            Ablation::NoTiming => "-timing",
        }
    }

    pub fn removes(self, kind: SlotKind) -> bool {
        match self {
            Ablation::Full => false,
            Ablation::NoLocation => kind.is_location(),
            Ablation::NoTiming => kind.is_timing(),
        }
    }

    /// Indices of the slots that survive the ablation.
    pub fn kept_columns(self, layout: &FeatureLayout) -> Vec<usize> {
        layout
            .slots()
            .enumerate()
            .filter(|(_, s)| !self.removes(s.kind))
            .map(|(i, _)| i)
            .collect()
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Ablation::Full),
            "-location" | "no-location" => Ok(Ablation::NoLocation),
            "-timing" | "no-timing" => Ok(Ablation::NoTiming),
            _ => Err(format!("unknown ablation {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvddSettings {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
}

impl Default for SvddSettings {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 1e-3,
            batch_size: 64,
            weight_decay: DEFAULT_WEIGHT_DECAY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AeSettings {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for AeSettings {
    fn default() -> Self {
        Self {
            epochs: 100,
            lr: 1e-3,
            batch_size: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub encoder: EncoderKind,
    pub detector: DetectorKind,
    pub scaling: ScalingKind,
    pub ablation: Ablation,
    pub buffer: usize,
    pub augment: usize,
    pub image_size: usize,
    pub svdd: SvddSettings,
    pub autoencoder: AeSettings,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderKind::OursPca,
            detector: DetectorKind::Svdd,
            scaling: ScalingKind::Standardize,
            ablation: Ablation::Full,
            buffer: crate::preprocess::DEFAULT_CAPACITY,
            augment: 2400,
            image_size: DEFAULT_SIZE,
            svdd: SvddSettings::default(),
            autoencoder: AeSettings::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Detector {
    Svdd(SvddModel),
    Autoencoder(AutoencoderModel),
}

impl Detector {
    pub fn threshold(&self) -> Option<f64> {
        match self {
            Detector::Svdd(m) => m.threshold,
            Detector::Autoencoder(m) => m.threshold,
        }
    }

    pub fn set_threshold(&mut self, t: f64) {
        match self {
            Detector::Svdd(m) => m.threshold = Some(t),
            Detector::Autoencoder(m) => m.threshold = Some(t),
        }
    }
}

/// Everything fitted for one user except the detector weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineState {
    pub config: PipelineConfig,
    pub layout: FeatureLayout,
    pub scaler: Scaler,
    pub encoder: Option<ImageEncoder>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserPipeline {
    pub state: PipelineState,
    pub detector: Detector,
}

/// Seeds for the independent random streams of one fit.
fn derived_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stream)
}

impl PipelineState {
    pub fn scale(&self, raw: &[f64]) -> Result<Vec<f64>, PipelineError> {
        Ok(self.scaler.transform(raw)?)
    }

    /// Weighted buffer output over scaled vectors with the ablation applied.
    pub fn window<V: AsRef<[f64]>>(&self, history: &[V], latest: &[f64]) -> Result<Vec<f64>, PipelineError> {
        let mut v = weighted_mean(history, latest)?;
        self.ablate(&mut v);
        Ok(v)
    }

    fn ablate(&self, v: &mut [f64]) {
        if self.config.ablation == Ablation::Full {
            return;
        }
        for (x, slot) in v.iter_mut().zip(self.layout.slots()) {
            if self.config.ablation.removes(slot.kind) {
                *x = 0.0;
            }
        }
    }

    pub fn encode(&self, v: &[f64]) -> Result<Option<EncodedImage>, PipelineError> {
        match (&self.encoder, self.config.detector) {
            (Some(e), DetectorKind::Svdd) => Ok(Some(e.encode(v)?)),
            _ => Ok(None),
        }
    }

    fn ae_input(&self, v: &[f64]) -> Vec<f64> {
        self.config
            .ablation
            .kept_columns(&self.layout)
            .into_iter()
            .map(|i| v[i])
            .collect()
    }
}

impl UserPipeline {
    /// Fit scaling, augmentation, encoder and detector on raw genuine training vectors.
    pub fn fit<V: AsRef<[f64]>>(
        config: PipelineConfig,
        layout: FeatureLayout,
        train: &[V],
    ) -> Result<(Self, TrainReport), PipelineError> {
        for v in train {
            if v.as_ref().len() != layout.dim() {
                return Err(PreprocessError::DimensionMismatch {
                    expected: layout.dim(),
                    actual: v.as_ref().len(),
                }
                .into());
            }
        }
        let scaler = Scaler::fit(config.scaling, train)?;
        let scaled: Vec<Vec<f64>> = train.iter().map(|v| scaler.transform(v.as_ref())).collect::<Result<_, _>>()?;
        let mut state = PipelineState {
            config,
            layout,
            scaler,
            encoder: None,
        };
        let mut vectors = augment(&scaled, config.buffer, config.augment, derived_seed(config.seed, 1))?;
        for v in &mut vectors {
            state.ablate(v);
        }
        let (detector, report) = match config.detector {
            DetectorKind::Svdd => {
                let canvas = CanvasConfig {
                    width: config.image_size,
                    height: config.image_size,
                    ..CanvasConfig::with_range(config.scaling.coordinate_range())
                };
                let encoder = ImageEncoder::fit(config.encoder, layout, canvas, &vectors)?;
                let images: Vec<EncodedImage> = vectors.iter().map(|v| encoder.encode(v)).collect::<Result<_, _>>()?;
                state.encoder = Some(encoder);
                let arch = SvddArch {
                    height: config.image_size,
                    width: config.image_size,
                    ..SvddArch::default()
                };
                let mut model = SvddModel::new(arch, config.svdd.weight_decay, derived_seed(config.seed, 2));
                let opts = TrainOptions {
                    epochs: config.svdd.epochs,
                    lr: config.svdd.lr,
                    batch_size: config.svdd.batch_size,
                    seed: derived_seed(config.seed, 3),
                };
                let report = model.fit(&images, &opts)?;
                (Detector::Svdd(model), report)
            }
            DetectorKind::Autoencoder => {
                let inputs: Vec<Vec<f64>> = vectors.iter().map(|v| state.ae_input(v)).collect();
                let mut model = AutoencoderModel::new(
                    inputs[0].len(),
                    &crate::neural::autoencoder::DEFAULT_HIDDEN,
                    derived_seed(config.seed, 2),
                );
                let opts = AeOptions {
                    epochs: config.autoencoder.epochs,
                    lr: config.autoencoder.lr,
                    batch_size: config.autoencoder.batch_size,
                    seed: derived_seed(config.seed, 3),
                };
                let report = model.fit(&inputs, &opts)?;
                (Detector::Autoencoder(model), report)
            }
        };
        Ok((Self { state, detector }, report))
    }

    /// Anomaly score of a buffered, ablated vector.
    pub fn score_vector(&self, v: &[f64]) -> Result<f64, PipelineError> {
        match &self.detector {
            Detector::Svdd(m) => {
                let image = self.state.encode(v)?.ok_or(EncodingError::Unfitted)?;
                Ok(m.score(&image)?)
            }
            Detector::Autoencoder(m) => Ok(m.score(&self.state.ae_input(v))?),
        }
    }

    /// Score `latest` (scaled) after `history` (scaled, oldest first).
    pub fn score_window<V: AsRef<[f64]>>(&self, history: &[V], latest: &[f64]) -> Result<f64, PipelineError> {
        let v = self.state.window(history, latest)?;
        self.score_vector(&v)
    }

    pub fn threshold(&self) -> Option<f64> {
        self.detector.threshold()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ablation_columns() {
        let layout = FeatureLayout::new(10).unwrap();
        assert_eq!(Ablation::Full.kept_columns(&layout).len(), 76);
        assert_eq!(Ablation::NoLocation.kept_columns(&layout).len(), 56);
        // hold per key plus four digraph intervals
        assert_eq!(Ablation::NoTiming.kept_columns(&layout).len(), 76 - 10 - 36);
        assert_eq!("-timing".parse::<Ablation>().unwrap(), Ablation::NoTiming);
        assert!("none".parse::<Ablation>().is_err());
    }

    #[test]
    fn detector_names_round_trip() {
        for d in [DetectorKind::Svdd, DetectorKind::Autoencoder] {
            assert_eq!(d.name().parse::<DetectorKind>().unwrap(), d);
        }
    }
}
