//! Per-user train / calibrate / test loop.
//!
//! Genuine samples are split chronologically into train, validation and test.
//! Every validation or test attempt is scored through the buffer: a genuine
//! attempt follows the user's own previous `B - 1` samples, and the j-th
//! imposter attempt of a split replaces the genuine sample in that split's
//! j-th slot. The detector threshold is the validation EER threshold.

use std::fs::File;
use std::io::BufReader;

use rayon::prelude::*;

use super::config::{scaling_name, DataSource, ExperimentConfig, RunSpec};
use super::metrics::{compute_eer, compute_metrics, ScoredSet};
use super::report::{ExperimentReport, RunReport, Summary, UserOutcome, UserResult};
use super::EvalError;
use crate::features::{extract_features, FeatureLayout};
use crate::pipeline::{DetectorKind, UserPipeline};
use crate::sample::{read_jsonl, KeystrokeSample, Label};
use crate::synth::generate_cohort;

/// Raw feature vectors of one user, genuine in chronological order.
#[derive(Debug, Clone, PartialEq)]
pub struct UserVectors {
    pub user: String,
    pub genuine: Vec<Vec<f64>>,
    pub imposters: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub layout: FeatureLayout,
    pub users: Vec<UserVectors>,
}

impl Dataset {
    /// Group labeled samples by claimed user, in order of first appearance.
    /// Unlabeled samples are ignored.
    pub fn from_samples(samples: &[KeystrokeSample], pin_length: usize) -> Result<Self, EvalError> {
        let layout = FeatureLayout::new(pin_length).map_err(|e| EvalError::Data(e.to_string()))?;
        let mut users: Vec<UserVectors> = Vec::new();
        for s in samples {
            if s.label == Label::Unlabeled {
                continue;
            }
            let v = extract_features(s).map_err(|e| EvalError::Data(format!("{}: {e}", s.user_id)))?;
            if v.values.len() != layout.dim() {
                return Err(EvalError::Data(format!("{}: pin length differs from {pin_length}", s.user_id)));
            }
            let idx = match users.iter().position(|u| u.user == s.user_id) {
                Some(i) => i,
                None => {
                    users.push(UserVectors {
                        user: s.user_id.clone(),
                        genuine: Vec::new(),
                        imposters: Vec::new(),
                    });
                    users.len() - 1
                }
            };
            match s.label {
                Label::Genuine => users[idx].genuine.push(v.values),
                _ => users[idx].imposters.push(v.values),
            }
        }
        Ok(Self { layout, users })
    }
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset, EvalError> {
    let ds = match &cfg.data {
        DataSource::Synthetic(s) => {
            let cohort = generate_cohort(s).map_err(|e| EvalError::Data(e.to_string()))?;
            Dataset::from_samples(&cohort.samples(), s.pin_length)?
        }
        DataSource::Jsonl { path, pin_length } => {
            let file = File::open(path)?;
            let samples = read_jsonl(BufReader::new(file), *pin_length).map_err(|e| EvalError::Data(e.to_string()))?;
            Dataset::from_samples(&samples, *pin_length)?
        }
    };
    Ok(match &cfg.users {
        Some(keep) => Dataset {
            layout: ds.layout,
            users: ds.users.into_iter().filter(|u| keep.contains(&u.user)).collect(),
        },
        None => ds,
    })
}

/// Scores of the genuine attempts `scaled[start..start + len]` and of the
/// imposter attempts placed over the same slots.
pub fn score_split(
    pipe: &UserPipeline,
    scaled: &[Vec<f64>],
    start: usize,
    len: usize,
    imposters: &[Vec<f64>],
) -> Result<ScoredSet, String> {
    let b = pipe.state.config.buffer;
    let window_score = |slot: usize, latest: &[f64]| {
        pipe.score_window(&scaled[slot + 1 - b..slot], latest)
            .map_err(|e| e.to_string())
    };
    let genuine = (start..start + len)
        .map(|i| window_score(i, &scaled[i]))
        .collect::<Result<Vec<_>, _>>()?;
    let imposter = imposters
        .iter()
        .enumerate()
        .map(|(j, raw)| {
            let latest = pipe.state.scale(raw).map_err(|e| e.to_string())?;
            window_score(start + j % len, &latest)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ScoredSet::new(genuine, imposter))
}

/// Train, calibrate and test one run for one user.
pub fn run_single(
    cfg: &ExperimentConfig,
    run: &RunSpec,
    layout: FeatureLayout,
    user_index: usize,
    data: &UserVectors,
) -> Result<(UserResult, UserPipeline), String> {
    let split = cfg.split;
    let need = split.train + split.val + split.test;
    if data.genuine.len() < need {
        return Err(format!("need {need} genuine samples, have {}", data.genuine.len()));
    }
    if data.imposters.len() < split.val + split.test {
        return Err(format!(
            "need {} imposter samples, have {}",
            split.val + split.test,
            data.imposters.len()
        ));
    }
    let pcfg = cfg.pipeline_for(run, user_index);
    let (mut pipe, report) =
        UserPipeline::fit(pcfg, layout, &data.genuine[..split.train]).map_err(|e| e.to_string())?;
    let scaled: Vec<Vec<f64>> = data.genuine[..need]
        .iter()
        .map(|v| pipe.state.scale(v))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let (val_imp, test_imp) = data.imposters[..split.val + split.test].split_at(split.val);
    let val = score_split(&pipe, &scaled, split.train, split.val, val_imp)?;
    let val_eer = compute_eer(&val).map_err(|e| e.to_string())?;
    pipe.detector.set_threshold(val_eer.threshold);
    let test = score_split(&pipe, &scaled, split.train + split.val, split.test, test_imp)?;
    let test_eer = compute_eer(&test).map_err(|e| e.to_string())?;
    let m = compute_metrics(&test, val_eer.threshold).map_err(|e| e.to_string())?;
    Ok((
        UserResult {
            eer: test_eer.eer,
            far: m.far,
            frr: m.frr,
            tar: m.tar,
            acc: m.acc,
            threshold: val_eer.threshold,
            val_eer: val_eer.eer,
            final_loss: report.final_loss,
            sweep: test_eer.sweep,
        },
        pipe,
    ))
}

fn run_one(cfg: &ExperimentConfig, run: &RunSpec, ds: &Dataset) -> RunReport {
    let users: Vec<UserOutcome> = ds
        .users
        .par_iter()
        .enumerate()
        .map(|(i, u)| match run_single(cfg, run, ds.layout, i, u) {
            Ok((result, _)) => UserOutcome {
                user: u.user.clone(),
                result: Some(result),
                error: None,
            },
            Err(e) => {
                log::warn!("{} / {}: {e}", run.label(), u.user);
                UserOutcome {
                    user: u.user.clone(),
                    result: None,
                    error: Some(e),
                }
            }
        })
        .collect();
    let summary = Summary::from_results(users.iter().filter_map(|u| u.result.as_ref()));
    RunReport {
        name: run.label(),
        encoder: match run.detector {
            DetectorKind::Svdd => run.encoder.name().to_string(),
            DetectorKind::Autoencoder => "raw".to_string(),
        },
        detector: run.detector.name().to_string(),
        preprocess: scaling_name(run.preprocess).to_string(),
        ablation: run.ablation.name().to_string(),
        users,
        summary,
    }
}

/// Run every configured run over every user. Failures of individual users are
/// recorded in the report rather than aborting the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, EvalError> {
    cfg.validate()?;
    let ds = load_dataset(cfg)?;
    if ds.users.is_empty() {
        return Err(EvalError::Data("no labeled users in dataset".into()));
    }
    Ok(run_on_dataset(cfg, &ds))
}

pub fn run_on_dataset(cfg: &ExperimentConfig, ds: &Dataset) -> ExperimentReport {
    ExperimentReport {
        seed: cfg.seed,
        runs: cfg.runs.iter().map(|r| run_one(cfg, r, ds)).collect(),
    }
}
