//! Recurrence plot, Gramian angular summation field and Markov transition field.
//!
//! Each encoder produces a square matrix over the input series, rendered as a
//! gray image resized to the canvas by nearest neighbour.

use super::image::EncodedImage;
use super::EncodingError;

pub const DEFAULT_RP_QUANTILE: f64 = 0.1;
pub const DEFAULT_MTF_BINS: usize = 8;

/// Linear-interpolated quantile of a sorted slice, `q` in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Binary recurrence matrix: `1` where `|s_i - s_j| <= theta`, with `theta` the
/// `quantile` of all `n * n` pairwise distances.
pub fn recurrence_matrix(series: &[f64], quantile: f64) -> Result<Vec<Vec<f64>>, EncodingError> {
    let n = series.len();
    if n < 2 {
        return Err(EncodingError::SeriesTooShort { needed: 2, got: n });
    }
    let mut dists: Vec<f64> = Vec::with_capacity(n * n);
    for a in series {
        for b in series {
            dists.push((a - b).abs());
        }
    }
    dists.sort_by(f64::total_cmp);
    let theta = quantile_sorted(&dists, quantile);
    Ok(series
        .iter()
        .map(|a| {
            series
                .iter()
                .map(|b| if (a - b).abs() <= theta { 1.0 } else { 0.0 })
                .collect()
        })
        .collect())
}

/// Min-max rescale to `[-1, 1]`; a constant series maps to zeros.
pub fn rescale_symmetric(series: &[f64]) -> Vec<f64> {
    let lo = series.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.0; series.len()];
    }
    series
        .iter()
        .map(|v| (2.0 * (v - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0))
        .collect()
}

/// Gramian angular summation field `cos(phi_i + phi_j)` with `phi = arccos(x~)`.
pub fn gaf_matrix(series: &[f64]) -> Result<Vec<Vec<f64>>, EncodingError> {
    if series.is_empty() {
        return Err(EncodingError::SeriesTooShort { needed: 1, got: 0 });
    }
    let phi: Vec<f64> = rescale_symmetric(series).iter().map(|x| x.acos()).collect();
    Ok(phi
        .iter()
        .map(|a| phi.iter().map(|b| (a + b).cos()).collect())
        .collect())
}

/// Quantile bin of every point. Edges are the `k/n_bins` quantiles; a value
/// falls in the bin equal to the number of edges strictly below it.
pub fn quantile_bins(series: &[f64], n_bins: usize) -> Vec<usize> {
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let edges: Vec<f64> = (1..n_bins)
        .map(|k| quantile_sorted(&sorted, k as f64 / n_bins as f64))
        .collect();
    series
        .iter()
        .map(|&v| edges.partition_point(|&e| e < v).min(n_bins - 1))
        .collect()
}

/// Row-normalized transition matrix between quantile bins of consecutive points.
pub fn transition_matrix(bins: &[usize], n_bins: usize) -> Vec<Vec<f64>> {
    let mut w = vec![vec![0.0; n_bins]; n_bins];
    for pair in bins.windows(2) {
        w[pair[0]][pair[1]] += 1.0;
    }
    for row in &mut w {
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row.iter_mut().for_each(|v| *v /= total);
        }
    }
    w
}

/// Markov transition field `M[i][j] = W[bin(i)][bin(j)]`.
pub fn mtf_matrix(series: &[f64], n_bins: usize) -> Result<Vec<Vec<f64>>, EncodingError> {
    if series.len() < 2 {
        return Err(EncodingError::SeriesTooShort {
            needed: 2,
            got: series.len(),
        });
    }
    if n_bins < 2 {
        return Err(EncodingError::BadBins(n_bins));
    }
    let bins = quantile_bins(series, n_bins);
    let w = transition_matrix(&bins, n_bins);
    Ok(bins
        .iter()
        .map(|&bi| bins.iter().map(|&bj| w[bi][bj]).collect())
        .collect())
}

pub fn encode_rp(series: &[f64], quantile: f64, width: usize, height: usize) -> Result<EncodedImage, EncodingError> {
    Ok(EncodedImage::from_gray_matrix(&recurrence_matrix(series, quantile)?, width, height))
}

pub fn encode_gaf(series: &[f64], width: usize, height: usize) -> Result<EncodedImage, EncodingError> {
    let g = gaf_matrix(series)?;
    let gray: Vec<Vec<f64>> = g
        .iter()
        .map(|r| r.iter().map(|v| (v + 1.0) / 2.0).collect())
        .collect();
    Ok(EncodedImage::from_gray_matrix(&gray, width, height))
}

pub fn encode_mtf(series: &[f64], n_bins: usize, width: usize, height: usize) -> Result<EncodedImage, EncodingError> {
    Ok(EncodedImage::from_gray_matrix(&mtf_matrix(series, n_bins)?, width, height))
}
