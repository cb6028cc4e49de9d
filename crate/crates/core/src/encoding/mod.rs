//! Keystroke-to-image encodings.
//!
//! The marker encoding draws every keystroke of a scaled feature vector as an
//! asterisk on one upscaled key; the PCA variant derives marker size, opacity and
//! color from the non-position features. RP, GAF and MTF treat the whole
//! feature vector as a series.

pub mod baselines;
mod image;
pub mod pca;
pub mod render;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use image::{quantize, EncodedImage, DEFAULT_SIZE};
pub use pca::{keystroke_attributes, MarkerAttributes, PcaAttributeMap};
pub use render::{render, render_markers, AttributeSource, CanvasConfig, MarkerSpec};

use crate::features::FeatureLayout;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EncodingError {
    #[error("need at least 2 vectors to fit, got {0}")]
    InsufficientData(usize),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("covariance is zero; PCA is degenerate")]
    DegeneratePca,
    #[error("attribute map has not been fitted")]
    Unfitted,
    #[error("series too short: need {needed}, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("need at least 2 bins, got {0}")]
    BadBins(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EncoderKind {
    #[serde(rename = "ours-pca")]
    OursPca,
    #[serde(rename = "ours-xy")]
    OursXy,
    #[serde(rename = "rp")]
    Rp,
    #[serde(rename = "gaf")]
    Gaf,
    #[serde(rename = "mtf")]
    Mtf,
}

impl EncoderKind {
    pub const ALL: [EncoderKind; 5] = [
        EncoderKind::OursPca,
        EncoderKind::OursXy,
        EncoderKind::Rp,
        EncoderKind::Gaf,
        EncoderKind::Mtf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EncoderKind::OursPca => "ours-pca",
            EncoderKind::OursXy => "ours-xy",
            EncoderKind::Rp => "rp",
            EncoderKind::Gaf => "gaf",
            EncoderKind::Mtf => "mtf",
        }
    }
}

impl std::str::FromStr for EncoderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ours" | "ours-pca" => Ok(EncoderKind::OursPca),
            "ours-xy" => Ok(EncoderKind::OursXy),
            "rp" => Ok(EncoderKind::Rp),
            "gaf" => Ok(EncoderKind::Gaf),
            "mtf" => Ok(EncoderKind::Mtf),
            _ => Err(format!("unknown encoder {s:?}")),
        }
    }
}

/// An encoder with all fitted state needed to turn scaled, buffered feature
/// vectors into images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEncoder {
    pub kind: EncoderKind,
    pub layout: FeatureLayout,
    pub canvas: CanvasConfig,
    pub pca: Option<PcaAttributeMap>,
    pub rp_quantile: f64,
    pub mtf_bins: usize,
}

impl ImageEncoder {
    /// Fit the encoder on training vectors. Only the PCA variant learns anything.
    pub fn fit<R: AsRef<[f64]>>(
        kind: EncoderKind,
        layout: FeatureLayout,
        canvas: CanvasConfig,
        training: &[R],
    ) -> Result<Self, EncodingError> {
        let pca = if kind == EncoderKind::OursPca {
            let rows: Vec<[f64; pca::KEYSTROKE_ATTRS]> = training
                .iter()
                .flat_map(|v| keystroke_attributes(&layout, v.as_ref()))
                .collect();
            Some(PcaAttributeMap::fit(&rows)?)
        } else {
            None
        };
        Ok(Self {
            kind,
            layout,
            canvas,
            pca,
            rp_quantile: baselines::DEFAULT_RP_QUANTILE,
            mtf_bins: baselines::DEFAULT_MTF_BINS,
        })
    }

    pub fn encode(&self, values: &[f64]) -> Result<EncodedImage, EncodingError> {
        let (w, h) = (self.canvas.width, self.canvas.height);
        match self.kind {
            EncoderKind::OursPca => {
                let p = self.pca.as_ref().ok_or(EncodingError::Unfitted)?;
                render(&self.layout, values, AttributeSource::Pca(p), &self.canvas)
            }
            EncoderKind::OursXy => render(&self.layout, values, AttributeSource::Neutral, &self.canvas),
            EncoderKind::Rp => baselines::encode_rp(values, self.rp_quantile, w, h),
            EncoderKind::Gaf => baselines::encode_gaf(values, w, h),
            EncoderKind::Mtf => baselines::encode_mtf(values, self.mtf_bins, w, h),
        }
    }
}
