//! Marker rendering of keystrokes on a single upscaled key.
//!
//! Each keystroke becomes a 6-ray asterisk at its standardized touch offset.
//! Markers are composited source-over in keystroke order onto a black canvas
//! in `f64`, then quantized once. No anti-aliasing.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::image::{quantize, EncodedImage, DEFAULT_SIZE};
use super::pca::{keystroke_attributes, MarkerAttributes, PcaAttributeMap};
use super::EncodingError;
use crate::features::{FeatureLayout, SlotKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanvasConfig {
    pub width: usize,
    pub height: usize,
    /// Coordinate mapped to the first pixel column/row.
    pub coord_min: f64,
    /// Coordinate mapped to the last pixel column/row.
    pub coord_max: f64,
}

impl Default for CanvasConfig {
    fn default() -> Self {
        Self {
            width: DEFAULT_SIZE,
            height: DEFAULT_SIZE,
            coord_min: -3.0,
            coord_max: 3.0,
        }
    }
}

impl CanvasConfig {
    pub fn with_range(range: (f64, f64)) -> Self {
        Self {
            coord_min: range.0,
            coord_max: range.1,
            ..Self::default()
        }
    }

    /// Continuous pixel position of a coordinate, after clipping to the range.
    pub fn to_pixel(&self, v: f64, extent: usize) -> f64 {
        let t = (v.clamp(self.coord_min, self.coord_max) - self.coord_min) / (self.coord_max - self.coord_min);
        t * (extent - 1) as f64
    }

    pub fn column(&self, x: f64) -> f64 {
        self.to_pixel(x, self.width)
    }

    pub fn row(&self, y: f64) -> f64 {
        self.to_pixel(y, self.height)
    }
}

/// A fully specified marker in coordinate space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkerSpec {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub opacity: f64,
    pub color: [f64; 3],
}

impl MarkerSpec {
    pub fn new(x: f64, y: f64, attrs: MarkerAttributes) -> Self {
        Self {
            x,
            y,
            radius: attrs.radius,
            opacity: attrs.opacity,
            color: attrs.color,
        }
    }
}

/// Pixel offsets covered by an asterisk of the given radius, relative to its center.
///
/// Rays point at 30, 90 and 150 degrees and their opposites; each ray is sampled
/// at unit steps plus its endpoint. The set is point-symmetric by construction.
pub fn asterisk_offsets(radius: f64) -> BTreeSet<(i64, i64)> {
    let mut out = BTreeSet::new();
    out.insert((0, 0));
    let steps = radius.floor() as i64;
    for deg in [30.0f64, 90.0, 150.0] {
        let (s, c) = deg.to_radians().sin_cos();
        let mut push = |d: f64| {
            let dc = (d * c).round() as i64;
            let dr = -(d * s).round() as i64;
            out.insert((dr, dc));
            out.insert((-dr, -dc));
        };
        for i in 1..=steps {
            push(i as f64);
        }
        push(radius);
    }
    out
}

/// Composite markers in order onto a black canvas.
pub fn render_markers(markers: &[MarkerSpec], config: &CanvasConfig) -> EncodedImage {
    let (w, h) = (config.width, config.height);
    let mut canvas = vec![[0.0f64; 3]; w * h];
    for m in markers {
        let cc = config.column(m.x).round() as i64;
        let cr = config.row(m.y).round() as i64;
        let alpha = m.opacity.clamp(0.0, 1.0);
        for (dr, dc) in asterisk_offsets(m.radius) {
            let (r, c) = (cr + dr, cc + dc);
            if r < 0 || c < 0 || r >= h as i64 || c >= w as i64 {
                continue;
            }
            let px = &mut canvas[r as usize * w + c as usize];
            for ch in 0..3 {
                px[ch] = alpha * m.color[ch].clamp(0.0, 1.0) + (1.0 - alpha) * px[ch];
            }
        }
    }
    let pixels = canvas
        .iter()
        .flat_map(|px| px.iter().map(|&v| quantize(v)))
        .collect();
    EncodedImage::from_rgb(w, h, pixels)
}

/// How marker attributes are derived for each keystroke.
#[derive(Debug, Clone, Copy)]
pub enum AttributeSource<'a> {
    /// Position only; all markers share the neutral attributes.
    Neutral,
    Pca(&'a PcaAttributeMap),
}

/// Markers for every keystroke of a scaled feature vector.
pub fn markers_for(
    layout: &FeatureLayout,
    values: &[f64],
    source: AttributeSource<'_>,
) -> Result<Vec<MarkerSpec>, EncodingError> {
    if values.len() != layout.dim() {
        return Err(EncodingError::DimensionMismatch {
            expected: layout.dim(),
            actual: values.len(),
        });
    }
    let attrs = keystroke_attributes(layout, values);
    (0..layout.pin_length())
        .map(|k| {
            let a = match source {
                AttributeSource::Neutral => MarkerAttributes::neutral(),
                AttributeSource::Pca(p) => p.map_attributes(&attrs[k])?,
            };
            Ok(MarkerSpec::new(
                values[layout.monograph(SlotKind::X, k)],
                values[layout.monograph(SlotKind::Y, k)],
                a,
            ))
        })
        .collect()
}

/// Render one scaled feature vector.
pub fn render(
    layout: &FeatureLayout,
    values: &[f64],
    source: AttributeSource<'_>,
    config: &CanvasConfig,
) -> Result<EncodedImage, EncodingError> {
    Ok(render_markers(&markers_for(layout, values, source)?, config))
}
