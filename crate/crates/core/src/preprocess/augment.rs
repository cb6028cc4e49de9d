use std::collections::HashSet;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::buffer::weighted_mean;
use super::PreprocessError;

/// Above this many combinations subsets are drawn by rejection instead of enumeration.
const ENUMERATION_LIMIT: u128 = 200_000;

/// `n choose k`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i + 1) as u128,
            None => return u128::MAX,
        };
    }
    acc
}

fn all_combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Draw `count` distinct `capacity`-subsets of `0..n`, each sorted ascending.
pub fn sample_subsets(n: usize, capacity: usize, count: usize, seed: u64) -> Result<Vec<Vec<usize>>, PreprocessError> {
    if capacity < 2 {
        return Err(PreprocessError::BadCapacity(capacity));
    }
    if n < capacity {
        return Err(PreprocessError::InsufficientData {
            needed: capacity,
            got: n,
        });
    }
    let total = binomial(n, capacity);
    if count as u128 > total {
        return Err(PreprocessError::TooManyCombinations {
            requested: count,
            maximum: total,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if total <= ENUMERATION_LIMIT.max(2 * count as u128) {
        let combos = all_combinations(n, capacity);
        let picks = index::sample(&mut rng, combos.len(), count);
        return Ok(picks.into_iter().map(|i| combos[i].clone()).collect());
    }
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut subset = index::sample(&mut rng, n, capacity).into_vec();
        subset.sort_unstable();
        if seen.insert(subset.clone()) {
            out.push(subset);
        }
    }
    Ok(out)
}

/// Combinatorial augmentation: `count` distinct subsets of the input, each
/// reduced with the buffer weighting, highest original index as latest.
pub fn augment<V: AsRef<[f64]>>(
    vectors: &[V],
    capacity: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, PreprocessError> {
    let subsets = sample_subsets(vectors.len(), capacity, count, seed)?;
    subsets
        .iter()
        .map(|s| {
            let (latest, history) = s.split_last().expect("capacity >= 2");
            let hist: Vec<&[f64]> = history.iter().map(|&i| vectors[i].as_ref()).collect();
            weighted_mean(&hist, vectors[*latest].as_ref())
        })
        .collect()
}
