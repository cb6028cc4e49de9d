//! On-disk form of a trained user pipeline.
//!
//! A model directory holds `pipeline.json` (scaler, encoder, PCA map, threshold
//! and the name of the weights file) and one weights file per training run.
//! `pipeline.json` is replaced last by rename, so it always points at a
//! complete set of weights.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use keydyn_core::neural::io::{read_autoencoder, read_svdd, write_autoencoder, write_svdd};
use keydyn_core::neural::NeuralError;
use keydyn_core::pipeline::{Detector, PipelineState, UserPipeline};

pub const MANIFEST: &str = "pipeline.json";

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] NeuralError),
    #[error("no model in {0}")]
    Missing(PathBuf),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    version: u64,
    weights: String,
    threshold: Option<f64>,
    state: PipelineState,
}

/// Write `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("file"),
        std::process::id()
    ));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Save a pipeline as generation `version` and remove older weight files.
pub fn save(dir: &Path, pipe: &UserPipeline, version: u64) -> Result<(), ArtifactError> {
    fs::create_dir_all(dir)?;
    let (weights, ext) = match &pipe.detector {
        Detector::Svdd(_) => (format!("model-{version}.kdsv"), "kdsv"),
        Detector::Autoencoder(_) => (format!("model-{version}.kdae"), "kdae"),
    };
    let path = dir.join(&weights);
    {
        let mut w = BufWriter::new(File::create(&path)?);
        match &pipe.detector {
            Detector::Svdd(m) => write_svdd(m, &mut w)?,
            Detector::Autoencoder(m) => write_autoencoder(m, &mut w)?,
        }
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    }
    let manifest = Manifest {
        version,
        weights: weights.clone(),
        threshold: pipe.threshold(),
        state: pipe.state.clone(),
    };
    write_atomic(&dir.join(MANIFEST), &serde_json::to_vec_pretty(&manifest)?)?;
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name();
        let name = name.to_string_lossy();
        let stale = name.starts_with("model-") && name != weights && (name.ends_with(".kdsv") || name.ends_with(".kdae"));
        if stale {
            let _ = fs::remove_file(dir.join(&*name));
        }
    }
    log::debug!("saved {ext} model generation {version} to {}", dir.display());
    Ok(())
}

/// Load the pipeline and its generation number.
pub fn load(dir: &Path) -> Result<(UserPipeline, u64), ArtifactError> {
    let manifest_path = dir.join(MANIFEST);
    if !manifest_path.exists() {
        return Err(ArtifactError::Missing(dir.to_path_buf()));
    }
    let manifest: Manifest = serde_json::from_reader(BufReader::new(File::open(manifest_path)?))?;
    let reader = BufReader::new(File::open(dir.join(&manifest.weights))?);
    let mut detector = if manifest.weights.ends_with(".kdae") {
        Detector::Autoencoder(read_autoencoder(reader)?)
    } else {
        Detector::Svdd(read_svdd(reader)?)
    };
    if let Some(t) = manifest.threshold {
        detector.set_threshold(t);
    }
    Ok((
        UserPipeline {
            state: manifest.state,
            detector,
        },
        manifest.version,
    ))
}
