//! Batch image export for `keydyn encode`.
//!
//! For each user with genuine samples, the scaler and encoder are fitted on
//! that user's buffered windows, and every window is written as
//!
//! ```text
//! <out>/<user>/img-0000.png ...   one PNG per window
//! <out>/<user>/images.kdyn        rows = windows, cols = 3·H·W (CHW order)
//! <out>/<user>/vectors.kdyn       buffered, scaled feature vectors
//! <out>/<user>/vectors.csv        the same with slot names as header
//! ```

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;

use keydyn_core::encoding::{CanvasConfig, EncoderKind, ImageEncoder};
use keydyn_core::features::{extract_features, FeatureLayout};
use keydyn_core::preprocess::matrix_file::{write_csv, write_matrix};
use keydyn_core::preprocess::{weighted_mean, Scaler, ScalingKind};
use keydyn_core::sample::{KeystrokeSample, Label};

#[derive(Debug, Clone, Copy)]
pub struct ExportOptions {
    pub encoder: EncoderKind,
    pub scaling: ScalingKind,
    pub buffer: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExportedUser {
    pub user: String,
    pub images: usize,
}

pub fn export_images(
    samples: &[KeystrokeSample],
    layout: FeatureLayout,
    opts: ExportOptions,
    out: &Path,
) -> Result<Vec<ExportedUser>, String> {
    if opts.buffer < 2 {
        return Err("buffer must be at least 2".into());
    }
    let mut users: Vec<(String, Vec<Vec<f64>>)> = Vec::new();
    for s in samples.iter().filter(|s| s.label != Label::Imposter) {
        let v = extract_features(s).map_err(|e| format!("{}: {e}", s.user_id))?.values;
        if v.len() != layout.dim() {
            return Err(format!("{}: PIN length differs from {}", s.user_id, layout.pin_length()));
        }
        match users.iter_mut().find(|(u, _)| *u == s.user_id) {
            Some((_, vs)) => vs.push(v),
            None => users.push((s.user_id.clone(), vec![v])),
        }
    }
    let header: Vec<String> = layout.slots().map(|s| s.to_string()).collect();
    let mut exported = Vec::new();
    for (user, raw) in users {
        if raw.len() < opts.buffer {
            log::warn!("{user}: {} samples, fewer than the buffer size; skipped", raw.len());
            continue;
        }
        let scaler = Scaler::fit(opts.scaling, &raw).map_err(|e| format!("{user}: {e}"))?;
        let scaled: Vec<Vec<f64>> = raw
            .iter()
            .map(|v| scaler.transform(v))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let windows: Vec<Vec<f64>> = (opts.buffer - 1..scaled.len())
            .map(|i| weighted_mean(&scaled[i + 1 - opts.buffer..i], &scaled[i]))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let canvas = CanvasConfig::with_range(opts.scaling.coordinate_range());
        let encoder = ImageEncoder::fit(opts.encoder, layout, canvas, &windows).map_err(|e| format!("{user}: {e}"))?;
        let dir = out.join(&user);
        fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
        let mut tensors = Vec::with_capacity(windows.len());
        for (i, w) in windows.iter().enumerate() {
            let img = encoder.encode(w).map_err(|e| format!("{user}: {e}"))?;
            fs::write(dir.join(format!("img-{i:04}.png")), img.to_png()).map_err(|e| e.to_string())?;
            tensors.push(img.to_chw());
        }
        let cols = 3 * canvas.width * canvas.height;
        let file = |name: &str| {
            File::create(dir.join(name))
                .map(BufWriter::new)
                .map_err(|e| format!("{}: {e}", dir.join(name).display()))
        };
        write_matrix(file("images.kdyn")?, &tensors, cols).map_err(|e| e.to_string())?;
        write_matrix(file("vectors.kdyn")?, &windows, layout.dim()).map_err(|e| e.to_string())?;
        write_csv(file("vectors.csv")?, &header, &windows).map_err(|e| e.to_string())?;
        exported.push(ExportedUser {
            user,
            images: windows.len(),
        });
    }
    Ok(exported)
}
