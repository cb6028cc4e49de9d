use std::io::Write;

use serde::{Deserialize, Serialize};

pub const DEFAULT_SIZE: usize = 64;

/// 8-bit RGB raster, row-major `height x width x 3`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncodedImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl EncodedImage {
    pub fn black(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![0; width * height * 3],
        }
    }

    pub fn from_rgb(width: usize, height: usize, pixels: Vec<u8>) -> Self {
        assert_eq!(pixels.len(), width * height * 3, "pixel buffer size");
        Self { width, height, pixels }
    }

    /// Nearest-neighbour resample of a square intensity matrix (values in `[0, 1]`)
    /// into a gray image.
    pub fn from_gray_matrix(matrix: &[Vec<f64>], width: usize, height: usize) -> Self {
        let n = matrix.len();
        let mut img = Self::black(width, height);
        for row in 0..height {
            let si = row * n / height;
            for col in 0..width {
                let sj = col * matrix[si].len() / width;
                let v = quantize(matrix[si][sj]);
                img.set(row, col, [v, v, v]);
            }
        }
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> [u8; 3] {
        let i = (row * self.width + col) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, row: usize, col: usize, rgb: [u8; 3]) {
        let i = (row * self.width + col) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Channel-major `3 x H x W` tensor scaled to `[0, 1]`.
    pub fn to_chw(&self) -> Vec<f64> {
        let plane = self.width * self.height;
        let mut out = vec![0.0; 3 * plane];
        for (p, px) in self.pixels.chunks_exact(3).enumerate() {
            for c in 0..3 {
                out[c * plane + p] = px[c] as f64 / 255.0;
            }
        }
        out
    }

    pub fn write_png<W: Write>(&self, w: W) -> Result<(), png::EncodingError> {
        let mut enc = png::Encoder::new(w, self.width as u32, self.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header()?;
        writer.write_image_data(&self.pixels)?;
        writer.finish()
    }

    pub fn to_png(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_png(&mut out).expect("in-memory PNG encoding");
        out
    }
}

/// Map `[0, 1]` to `0..=255`, clamping.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
