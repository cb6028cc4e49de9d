use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::scaler::check_dim;
use super::PreprocessError;

pub const DEFAULT_CAPACITY: usize = 5;

/// Weights applied to a full window, oldest first.
///
/// Each of the `B-1` older inputs gets `1/(2(B-1))`; the latest gets `1/2`.
pub fn buffer_weights(capacity: usize) -> Vec<f64> {
    assert!(capacity >= 2, "buffer capacity must be at least 2");
    let older = 1.0 / (2.0 * (capacity - 1) as f64);
    let mut w = vec![older; capacity - 1];
    w.push(0.5);
    w
}

/// Weighted mean of `history` (the `B-1` older vectors) and `latest`.
///
/// Computed as `(sum(history) + (B-1) * latest) / (2(B-1))`.
pub fn weighted_mean<V: AsRef<[f64]>>(history: &[V], latest: &[f64]) -> Result<Vec<f64>, PreprocessError> {
    if history.is_empty() {
        return Err(PreprocessError::NotReady { have: 1, need: 2 });
    }
    let older = history.len() as f64;
    let mut acc = vec![0.0; latest.len()];
    for v in history {
        let v = v.as_ref();
        check_dim(latest.len(), v.len())?;
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    let scale = 1.0 / (2.0 * older);
    Ok(acc
        .iter()
        .zip(latest)
        .map(|(s, l)| (s + older * l) * scale)
        .collect())
}

/// Sliding window over the most recent standardized vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBuffer {
    capacity: usize,
    window: VecDeque<Vec<f64>>,
}

impl SampleBuffer {
    pub fn new(capacity: usize) -> Result<Self, PreprocessError> {
        if capacity < 2 {
            return Err(PreprocessError::BadCapacity(capacity));
        }
        Ok(Self {
            capacity,
            window: VecDeque::with_capacity(capacity),
        })
    }

    /// Buffer pre-filled with the given history (oldest first); only the last `B-1` are kept.
    pub fn with_history(capacity: usize, history: impl IntoIterator<Item = Vec<f64>>) -> Result<Self, PreprocessError> {
        let mut buf = Self::new(capacity)?;
        for v in history {
            buf.record(v);
        }
        Ok(buf)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Number of stored prior vectors (at most `B-1`).
    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    pub fn is_ready(&self) -> bool {
        self.window.len() == self.capacity - 1
    }

    pub fn history(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.window.iter()
    }

    /// Weighted output for `latest` without modifying the window.
    pub fn peek(&self, latest: &[f64]) -> Result<Vec<f64>, PreprocessError> {
        if !self.is_ready() {
            return Err(PreprocessError::NotReady {
                have: self.window.len() + 1,
                need: self.capacity,
            });
        }
        let history: Vec<&[f64]> = self.window.iter().map(Vec::as_slice).collect();
        weighted_mean(&history, latest)
    }

    /// Append `latest` to the window, dropping the oldest once full.
    pub fn record(&mut self, latest: Vec<f64>) {
        if self.window.len() == self.capacity - 1 {
            self.window.pop_front();
        }
        self.window.push_back(latest);
    }

    /// Emit the weighted mean for `latest` and slide the window.
    ///
    /// Returns `Ok(None)` while the buffer is still filling; `latest` is
    /// recorded either way.
    pub fn emit(&mut self, latest: Vec<f64>) -> Result<Option<Vec<f64>>, PreprocessError> {
        let out = if self.is_ready() {
            Some(self.peek(&latest)?)
        } else {
            None
        };
        self.record(latest);
        Ok(out)
    }
}
