//! Train and calibrate one user's model from enrollment samples.

use serde::{Deserialize, Serialize};

use keydyn_core::encoding::{EncodedImage, EncoderKind};
use keydyn_core::eval::{compute_eer, score_split};
use keydyn_core::features::FeatureLayout;
use keydyn_core::pipeline::{AeSettings, Ablation, DetectorKind, PipelineConfig, SvddSettings, UserPipeline};
use keydyn_core::preprocess::{binomial, ScalingKind, DEFAULT_CAPACITY};
use keydyn_core::synth::{generate_cohort, SynthConfig};

/// Fraction of enrollment samples used for training; the rest calibrates.
pub const TRAIN_FRACTION: f64 = 0.6;
const MAX_CALIBRATION_IMPOSTERS: usize = 200;

/// Training hyperparameters; every field is optional in requests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainParams {
    pub encoder: EncoderKind,
    pub detector: DetectorKind,
    pub preprocess: ScalingKind,
    pub buffer: usize,
    pub augment: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        let svdd = SvddSettings::default();
        Self {
            encoder: EncoderKind::OursPca,
            detector: DetectorKind::Svdd,
            preprocess: ScalingKind::Standardize,
            buffer: DEFAULT_CAPACITY,
            augment: 2400,
            epochs: svdd.epochs,
            lr: svdd.lr,
            batch_size: svdd.batch_size,
            weight_decay: svdd.weight_decay,
            seed: 0,
        }
    }
}

impl TrainParams {
    fn pipeline(&self, n_train: usize) -> PipelineConfig {
        let available = binomial(n_train, self.buffer);
        PipelineConfig {
            encoder: self.encoder,
            detector: self.detector,
            scaling: self.preprocess,
            ablation: Ablation::Full,
            buffer: self.buffer,
            augment: (self.augment as u128).min(available) as usize,
            image_size: keydyn_core::encoding::DEFAULT_SIZE,
            svdd: SvddSettings {
                epochs: self.epochs,
                lr: self.lr,
                batch_size: self.batch_size,
                weight_decay: self.weight_decay,
            },
            autoencoder: AeSettings {
                epochs: self.epochs,
                lr: self.lr,
                batch_size: self.batch_size,
            },
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImposterSource {
    /// Samples of other enrolled users.
    Enrolled,
    /// Generated stand-ins, used when no other user is enrolled.
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub epochs: usize,
    pub final_loss: f64,
    pub validation_eer: f64,
    pub threshold: f64,
    pub train_samples: usize,
    pub validation_samples: usize,
    pub augmented: usize,
    pub imposter_source: ImposterSource,
    pub imposter_samples: usize,
}

pub struct Trained {
    pub pipeline: UserPipeline,
    pub summary: TrainSummary,
    /// Raw vectors of the last `B - 1` enrollment samples, the initial buffer history.
    pub window: Vec<Vec<f64>>,
    /// Image of the most recent enrollment window, when the encoder renders one.
    pub preview: Option<EncodedImage>,
}

/// Feature vectors of a generated population, standing in for imposters.
pub fn surrogate_imposters(pin_length: usize, count: usize, seed: u64) -> Result<Vec<Vec<f64>>, String> {
    let users = 5;
    let cfg = SynthConfig {
        users,
        sessions: 1,
        per_session: count.div_ceil(users).max(1),
        imposters_per_user: 0,
        pin_length,
        seed,
        ..SynthConfig::default()
    };
    let cohort = generate_cohort(&cfg).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(count);
    for s in cohort.samples() {
        let v = keydyn_core::features::extract_features(&s).map_err(|e| e.to_string())?;
        out.push(v.values);
    }
    out.truncate(count);
    Ok(out)
}

/// Fit on the first `TRAIN_FRACTION` of `genuine`, then set the threshold at the EER of
/// the remaining genuine samples against `imposters`.
pub fn train_user(
    layout: FeatureLayout,
    genuine: &[Vec<f64>],
    imposters: Vec<Vec<f64>>,
    source: ImposterSource,
    params: &TrainParams,
) -> Result<Trained, String> {
    if params.buffer < 2 {
        return Err("buffer must be at least 2".into());
    }
    let n = genuine.len();
    let n_train = ((n as f64) * TRAIN_FRACTION).floor() as usize;
    let n_val = n - n_train;
    if n_train < params.buffer || n_val == 0 {
        return Err(format!("{n} samples are too few to split for training"));
    }
    if imposters.is_empty() {
        return Err("no imposter samples for calibration".into());
    }
    let imposters: Vec<Vec<f64>> = imposters.into_iter().take(MAX_CALIBRATION_IMPOSTERS).collect();
    let cfg = params.pipeline(n_train);
    let (mut pipe, report) = UserPipeline::fit(cfg, layout, &genuine[..n_train]).map_err(|e| e.to_string())?;
    let scaled: Vec<Vec<f64>> = genuine
        .iter()
        .map(|v| pipe.state.scale(v))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let scores = score_split(&pipe, &scaled, n_train, n_val, &imposters)?;
    let eer = compute_eer(&scores).map_err(|e| e.to_string())?;
    pipe.detector.set_threshold(eer.threshold);
    let window = genuine[n + 1 - params.buffer..].to_vec();
    let latest = pipe
        .state
        .window(&scaled[n - params.buffer..n - 1], &scaled[n - 1])
        .map_err(|e| e.to_string())?;
    let preview = pipe.state.encode(&latest).map_err(|e| e.to_string())?;
    Ok(Trained {
        pipeline: pipe,
        summary: TrainSummary {
            epochs: report.epochs,
            final_loss: report.final_loss,
            validation_eer: eer.eer,
            threshold: eer.threshold,
            train_samples: n_train,
            validation_samples: n_val,
            augmented: cfg.augment,
            imposter_source: source,
            imposter_samples: imposters.len(),
        },
        window,
        preview,
    })
}
