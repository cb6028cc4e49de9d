//! PCA over per-keystroke non-position features, driving marker attributes.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::EncodingError;
use crate::features::{FeatureLayout, SlotKind};

/// Fraction of total variance the retained components must explain.
pub const COVERAGE: f64 = 0.90;

/// Number of non-position attributes per keystroke.
pub const KEYSTROKE_ATTRS: usize = 6;

/// Per-keystroke non-position vectors `[hold, force, dd, ud, uu, du]`, where the
/// digraph slots describe the transition into the keystroke. The first keystroke
/// has no incoming transition and its digraph slots are zero.
pub fn keystroke_attributes(layout: &FeatureLayout, values: &[f64]) -> Vec<[f64; KEYSTROKE_ATTRS]> {
    assert_eq!(values.len(), layout.dim(), "feature dimension");
    (0..layout.pin_length())
        .map(|k| {
            let mut a = [0.0; KEYSTROKE_ATTRS];
            a[0] = values[layout.monograph(SlotKind::Hold, k)];
            a[1] = values[layout.monograph(SlotKind::Force, k)];
            if k > 0 {
                for (i, kind) in SlotKind::DIGRAPH.iter().enumerate() {
                    a[2 + i] = values[layout.digraph(*kind, k - 1)];
                }
            }
            a
        })
        .collect()
}

/// Smallest `k` whose cumulative explained variance reaches `coverage`.
pub fn select_components(eigenvalues: &[f64], coverage: f64) -> usize {
    let total: f64 = eigenvalues.iter().sum();
    let mut cum = 0.0;
    for (i, &l) in eigenvalues.iter().enumerate() {
        cum += l;
        if cum / total >= coverage {
            return i + 1;
        }
    }
    eigenvalues.len()
}

/// Population covariance of the rows.
pub fn covariance<R: AsRef<[f64]>>(rows: &[R]) -> (Vec<f64>, DMatrix<f64>) {
    let d = rows[0].as_ref().len();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r.as_ref()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = DMatrix::zeros(d, d);
    for r in rows {
        let r = r.as_ref();
        for i in 0..d {
            let di = r[i] - mean[i];
            for j in i..d {
                cov[(i, j)] += di * (r[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / n;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    (mean, cov)
}

/// Fitted PCA transform plus the per-component ranges of the training projections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaAttributeMap {
    pub mean: Vec<f64>,
    /// All eigenvectors as rows, ordered by descending eigenvalue. Sign is fixed
    /// so that the largest-magnitude entry of each row is positive.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub n_components: usize,
    /// `(min, max)` of the training projections on each retained component.
    pub ranges: Vec<(f64, f64)>,
}

/// Marker attributes derived from one keystroke.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkerAttributes {
    pub radius: f64,
    pub opacity: f64,
    pub color: [f64; 3],
}

pub const RADIUS_RANGE: (f64, f64) = (2.0, 8.0);
pub const OPACITY_RANGE: (f64, f64) = (0.2, 1.0);
/// Normalized value used for any attribute without a retained component.
pub const MISSING_COMPONENT: f64 = 0.5;

impl MarkerAttributes {
    /// Attributes from normalized component values in `[0, 1]`; absent entries use the default.
    pub fn from_normalized(norm: &[f64]) -> Self {
        let at = |i: usize| norm.get(i).copied().unwrap_or(MISSING_COMPONENT);
        let lerp = |(lo, hi): (f64, f64), t: f64| lo + t * (hi - lo);
        Self {
            radius: lerp(RADIUS_RANGE, at(0)),
            opacity: lerp(OPACITY_RANGE, at(1)),
            color: [at(2), at(3), at(4)],
        }
    }

    /// Attributes used when no PCA mapping is applied.
    pub fn neutral() -> Self {
        Self::from_normalized(&[])
    }
}

impl PcaAttributeMap {
    /// Fit on a set of per-keystroke non-position vectors.
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, EncodingError> {
        Self::fit_with_coverage(rows, COVERAGE)
    }

    pub fn fit_with_coverage<R: AsRef<[f64]>>(rows: &[R], coverage: f64) -> Result<Self, EncodingError> {
        if rows.len() < 2 {
            return Err(EncodingError::InsufficientData(rows.len()));
        }
        let d = rows[0].as_ref().len();
        if rows.iter().any(|r| r.as_ref().len() != d) || d == 0 {
            return Err(EncodingError::DimensionMismatch {
                expected: d,
                actual: rows.iter().map(|r| r.as_ref().len()).find(|&l| l != d).unwrap_or(0),
            });
        }
        let (mean, cov) = covariance(rows);
        let trace = cov.trace();
        if !(trace > 0.0) {
            return Err(EncodingError::DegeneratePca);
        }
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut eigenvalues = Vec::with_capacity(d);
        let mut components = Vec::with_capacity(d);
        for &i in &order {
            eigenvalues.push(eig.eigenvalues[i].max(0.0));
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            normalize_sign(&mut v);
            components.push(v);
        }
        let n_components = select_components(&eigenvalues, coverage);
        let mut map = Self {
            mean,
            components,
            eigenvalues,
            n_components,
            ranges: Vec::new(),
        };
        let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); n_components];
        for r in rows {
            for (c, range) in map.project(r.as_ref()).into_iter().zip(ranges.iter_mut()) {
                range.0 = range.0.min(c);
                range.1 = range.1.max(c);
            }
        }
        map.ranges = ranges;
        Ok(map)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Coordinates on the retained components.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        self.components[..self.n_components]
            .iter()
            .map(|c| c.iter().zip(v).zip(&self.mean).map(|((a, x), m)| a * (x - m)).sum())
            .collect()
    }

    /// Projections min-max normalized with the training ranges and clipped to `[0, 1]`.
    pub fn normalized(&self, v: &[f64]) -> Result<Vec<f64>, EncodingError> {
        if self.ranges.len() != self.n_components {
            return Err(EncodingError::Unfitted);
        }
        if v.len() != self.dim() {
            return Err(EncodingError::DimensionMismatch {
                expected: self.dim(),
                actual: v.len(),
            });
        }
        Ok(self
            .project(v)
            .into_iter()
            .zip(&self.ranges)
            .map(|(p, &(lo, hi))| {
                if hi > lo {
                    ((p - lo) / (hi - lo)).clamp(0.0, 1.0)
                } else {
                    MISSING_COMPONENT
                }
            })
            .collect())
    }

    /// Component 1 sets the radius, 2 the opacity, 3-5 the RGB channels.
    pub fn map_attributes(&self, keystroke: &[f64]) -> Result<MarkerAttributes, EncodingError> {
        let norm = self.normalized(keystroke)?;
        Ok(MarkerAttributes::from_normalized(&norm))
    }
}

fn normalize_sign(v: &mut [f64]) {
    let pivot = v
        .iter()
        .copied()
        .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn axis_aligned_data() {
        // x in {-2, 2}: variance 4; y constant
        let rows = vec![vec![-2.0, 1.0], vec![2.0, 1.0], vec![-2.0, 1.0], vec![2.0, 1.0]];
        let p = PcaAttributeMap::fit(&rows).unwrap();
        assert!((p.eigenvalues[0] - 4.0).abs() < 1e-12);
        assert!(p.eigenvalues[1].abs() < 1e-12);
        assert!((p.components[0][0].abs() - 1.0).abs() < 1e-12);
        assert!(p.components[0][1].abs() < 1e-12);
        assert_eq!(p.n_components, 1);
    }

    #[test]
    fn isotropic_needs_both_components() {
        let rows = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let p = PcaAttributeMap::fit(&rows).unwrap();
        assert!((p.eigenvalues[0] - p.eigenvalues[1]).abs() < 1e-12);
        assert_eq!(p.n_components, 2);
    }

    #[test]
    fn degenerate_and_short_inputs() {
        assert!(matches!(
            PcaAttributeMap::fit(&vec![vec![1.0, 2.0]; 10]),
            Err(EncodingError::DegeneratePca)
        ));
        assert!(matches!(
            PcaAttributeMap::fit(&[vec![1.0, 2.0]]),
            Err(EncodingError::InsufficientData(1))
        ));
    }

    #[test]
    fn attribute_endpoints_and_defaults() {
        let rows = vec![vec![-2.0, 1.0], vec![2.0, 1.0], vec![0.0, 1.0]];
        let p = PcaAttributeMap::fit(&rows).unwrap();
        assert_eq!(p.n_components, 1);
        let (lo, _) = p.ranges[0];
        // point at the training minimum of component 1
        let at_min: Vec<f64> = p
            .mean
            .iter()
            .zip(&p.components[0])
            .map(|(m, c)| m + lo * c)
            .collect();
        let a = p.map_attributes(&at_min).unwrap();
        assert!((a.radius - 2.0).abs() < 1e-12);
        assert!((a.opacity - 0.6).abs() < 1e-12);
        assert_eq!(a.color, [0.5, 0.5, 0.5]);
        // far outside the training range clips to the maximum radius
        let far: Vec<f64> = p.components[0].iter().map(|c| c * 100.0).collect();
        assert_eq!(p.map_attributes(&far).unwrap().radius, 8.0);
        assert!(p.map_attributes(&[0.0]).is_err());
    }

    #[test]
    fn all_components_at_minimum() {
        let n = MarkerAttributes::from_normalized(&[0.0; 5]);
        assert_eq!((n.radius, n.opacity, n.color), (2.0, 0.2, [0.0; 3]));
        let neutral = MarkerAttributes::neutral();
        assert_eq!(neutral.radius, 5.0);
        assert!((neutral.opacity - 0.6).abs() < 1e-12);
    }

    #[test]
    fn unfitted_map_errors() {
        let p = PcaAttributeMap {
            mean: vec![0.0; 2],
            components: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            eigenvalues: vec![1.0, 1.0],
            n_components: 2,
            ranges: vec![],
        };
        assert!(matches!(p.map_attributes(&[0.0, 0.0]), Err(EncodingError::Unfitted)));
    }

    #[test]
    fn projection_matches_manual_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|_| {
                let a: f64 = rng.random_range(-1.0..1.0);
                let b: f64 = rng.random_range(-1.0..1.0);
                vec![a, 2.0 * a + 0.1 * b, b, 0.3 * rng.random_range(-1.0..1.0), a - b, 0.05 * b]
            })
            .collect();
        let p = PcaAttributeMap::fit(&rows).unwrap();
        let v = [0.3, -0.2, 0.9, 0.0, 0.1, -0.4];
        let norm = p.normalized(&v).unwrap();
        for c in 0..p.n_components {
            let mut proj = 0.0;
            for j in 0..6 {
                proj += p.components[c][j] * (v[j] - p.mean[j]);
            }
            let (lo, hi) = p.ranges[c];
            let expected = ((proj - lo) / (hi - lo)).max(0.0).min(1.0);
            assert!((norm[c] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn keystroke_vectors_take_incoming_digraph() {
        let layout = FeatureLayout::new(3).unwrap();
        let values: Vec<f64> = (0..layout.dim()).map(|i| i as f64).collect();
        let ks = keystroke_attributes(&layout, &values);
        assert_eq!(ks.len(), 3);
        assert_eq!(ks[0], [0.0, 3.0, 0.0, 0.0, 0.0, 0.0]);
        // keystroke 2: hold_2 at 8, force_2 at 11, digraph 1 starts at 12 + 4
        assert_eq!(ks[2], [8.0, 11.0, 16.0, 17.0, 18.0, 19.0]);
    }
}
