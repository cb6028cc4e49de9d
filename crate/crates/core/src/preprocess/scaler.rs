use serde::{Deserialize, Serialize};

use super::PreprocessError;

pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Per-slot z-score scaling fitted on genuine training vectors.
///
/// Uses the population (N denominator) standard deviation; any deviation
/// below `epsilon` is clamped to `epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub epsilon: f64,
}

impl Standardizer {
    pub fn fit<V: AsRef<[f64]>>(vectors: &[V]) -> Result<Self, PreprocessError> {
        Self::fit_with_epsilon(vectors, DEFAULT_EPSILON)
    }

    pub fn fit_with_epsilon<V: AsRef<[f64]>>(vectors: &[V], epsilon: f64) -> Result<Self, PreprocessError> {
        let dim = check_rows(vectors, 2)?;
        let n = vectors.len() as f64;
        let mut mean = vec![0.0; dim];
        for v in vectors {
            for (m, x) in mean.iter_mut().zip(v.as_ref()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for v in vectors {
            for ((s, x), m) in var.iter_mut().zip(v.as_ref()).zip(&mean) {
                let d = x - m;
                *s += d * d;
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt().max(epsilon)).collect();
        Ok(Self { mean, std, epsilon })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, v: &[f64]) -> Result<Vec<f64>, PreprocessError> {
        check_dim(self.dim(), v.len())?;
        Ok(v.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| (x - m) / s)
            .collect())
    }

    pub fn inverse(&self, z: &[f64]) -> Result<Vec<f64>, PreprocessError> {
        check_dim(self.dim(), z.len())?;
        Ok(z.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| x * s + m)
            .collect())
    }
}

/// Per-slot min-max scaling to `[0, 1]`, the ablation alternative to [`Standardizer`].
///
/// Values outside the fitted range are not clipped. A zero range is widened to `epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub range: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit<V: AsRef<[f64]>>(vectors: &[V]) -> Result<Self, PreprocessError> {
        let dim = check_rows(vectors, 2)?;
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        for v in vectors {
            for ((lo, hi), &x) in min.iter_mut().zip(max.iter_mut()).zip(v.as_ref()) {
                *lo = lo.min(x);
                *hi = hi.max(x);
            }
        }
        let range = min
            .iter()
            .zip(&max)
            .map(|(lo, hi)| (hi - lo).max(DEFAULT_EPSILON))
            .collect();
        Ok(Self { min, range })
    }

    pub fn transform(&self, v: &[f64]) -> Result<Vec<f64>, PreprocessError> {
        check_dim(self.min.len(), v.len())?;
        Ok(v.iter()
            .zip(&self.min)
            .zip(&self.range)
            .map(|((x, lo), r)| (x - lo) / r)
            .collect())
    }
}

/// Which scaling preset to apply before buffering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScalingKind {
    #[default]
    Standardize,
    Minmax,
}

impl ScalingKind {
    /// Coordinate range that the scaled values are expected to occupy,
    /// used as the rendering canvas extent.
    pub fn coordinate_range(self) -> (f64, f64) {
        match self {
            ScalingKind::Standardize => (-3.0, 3.0),
            ScalingKind::Minmax => (0.0, 1.0),
        }
    }
}

impl std::str::FromStr for ScalingKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standardize" => Ok(ScalingKind::Standardize),
            "minmax" => Ok(ScalingKind::Minmax),
            _ => Err(format!("unknown preprocessing {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Scaler {
    Standardize(Standardizer),
    Minmax(MinMaxScaler),
}

impl Scaler {
    pub fn fit<V: AsRef<[f64]>>(kind: ScalingKind, vectors: &[V]) -> Result<Self, PreprocessError> {
        Ok(match kind {
            ScalingKind::Standardize => Scaler::Standardize(Standardizer::fit(vectors)?),
            ScalingKind::Minmax => Scaler::Minmax(MinMaxScaler::fit(vectors)?),
        })
    }

    pub fn kind(&self) -> ScalingKind {
        match self {
            Scaler::Standardize(_) => ScalingKind::Standardize,
            Scaler::Minmax(_) => ScalingKind::Minmax,
        }
    }

    pub fn transform(&self, v: &[f64]) -> Result<Vec<f64>, PreprocessError> {
        match self {
            Scaler::Standardize(s) => s.transform(v),
            Scaler::Minmax(s) => s.transform(v),
        }
    }
}

fn check_rows<V: AsRef<[f64]>>(vectors: &[V], min_rows: usize) -> Result<usize, PreprocessError> {
    if vectors.len() < min_rows {
        return Err(PreprocessError::InsufficientData {
            needed: min_rows,
            got: vectors.len(),
        });
    }
    let dim = vectors[0].as_ref().len();
    for v in vectors {
        check_dim(dim, v.as_ref().len())?;
    }
    Ok(dim)
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<(), PreprocessError> {
    if expected != actual {
        return Err(PreprocessError::DimensionMismatch { expected, actual });
    }
    Ok(())
}
