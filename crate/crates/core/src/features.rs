//! Monograph, digraph, location and force features of a PIN entry.
//!
//! Layout for a PIN of length `L`: per keystroke `k` the four slots
//! `[hold_k, x_k, y_k, force_k]`, followed by per digraph `j` (keys `j`,`j+1`)
//! the four slots `[dd_j, ud_j, uu_j, du_j]`. Dimension is `4L + 4(L-1)`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sample::{KeystrokeSample, SampleError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotKind {
    Hold,
    X,
    Y,
    Force,
    Dd,
    Ud,
    Uu,
    Du,
}

impl SlotKind {
    pub const MONOGRAPH: [SlotKind; 4] = [SlotKind::Hold, SlotKind::X, SlotKind::Y, SlotKind::Force];
    pub const DIGRAPH: [SlotKind; 4] = [SlotKind::Dd, SlotKind::Ud, SlotKind::Uu, SlotKind::Du];

    pub fn name(self) -> &'static str {
        match self {
            SlotKind::Hold => "hold",
            SlotKind::X => "x",
            SlotKind::Y => "y",
            SlotKind::Force => "force",
            SlotKind::Dd => "dd",
            SlotKind::Ud => "ud",
            SlotKind::Uu => "uu",
            SlotKind::Du => "du",
        }
    }

    pub fn is_location(self) -> bool {
        matches!(self, SlotKind::X | SlotKind::Y)
    }

    pub fn is_timing(self) -> bool {
        matches!(
            self,
            SlotKind::Hold | SlotKind::Dd | SlotKind::Ud | SlotKind::Uu | SlotKind::Du
        )
    }
}

/// One named slot: a feature kind and the keystroke (or digraph) index it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Slot {
    pub kind: SlotKind,
    pub index: usize,
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.kind.name(), self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("PIN length {0} is too short; digraphs need at least 2 keys")]
    PinTooShort(usize),
    #[error(transparent)]
    Sample(#[from] SampleError),
}

/// Slot schema for a given PIN length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureLayout {
    pin_length: usize,
}

impl FeatureLayout {
    pub fn new(pin_length: usize) -> Result<Self, FeatureError> {
        if pin_length < 2 {
            return Err(FeatureError::PinTooShort(pin_length));
        }
        Ok(Self { pin_length })
    }

    pub fn pin_length(&self) -> usize {
        self.pin_length
    }

    pub fn dim(&self) -> usize {
        4 * self.pin_length + 4 * (self.pin_length - 1)
    }

    fn digraph_base(&self) -> usize {
        4 * self.pin_length
    }

    /// Position of a monograph slot for keystroke `k`.
    pub fn monograph(&self, kind: SlotKind, k: usize) -> usize {
        debug_assert!(k < self.pin_length);
        let offset = SlotKind::MONOGRAPH
            .iter()
            .position(|&m| m == kind)
            .expect("not a monograph slot");
        4 * k + offset
    }

    /// Position of a digraph slot for the pair `(j, j+1)`.
    pub fn digraph(&self, kind: SlotKind, j: usize) -> usize {
        debug_assert!(j + 1 < self.pin_length);
        let offset = SlotKind::DIGRAPH
            .iter()
            .position(|&m| m == kind)
            .expect("not a digraph slot");
        self.digraph_base() + 4 * j + offset
    }

    pub fn slot(&self, i: usize) -> Slot {
        assert!(i < self.dim(), "slot {i} out of range");
        if i < self.digraph_base() {
            Slot {
                kind: SlotKind::MONOGRAPH[i % 4],
                index: i / 4,
            }
        } else {
            let r = i - self.digraph_base();
            Slot {
                kind: SlotKind::DIGRAPH[r % 4],
                index: r / 4,
            }
        }
    }

    pub fn slots(&self) -> impl Iterator<Item = Slot> + '_ {
        (0..self.dim()).map(|i| self.slot(i))
    }

    pub fn names(&self) -> Vec<String> {
        self.slots().map(|s| s.to_string()).collect()
    }
}

/// Feature vector of one sample together with its layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub layout: FeatureLayout,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn get(&self, kind: SlotKind, index: usize) -> f64 {
        let pos = if SlotKind::MONOGRAPH.contains(&kind) {
            self.layout.monograph(kind, index)
        } else {
            self.layout.digraph(kind, index)
        };
        self.values[pos]
    }
}

/// Extract the full feature vector of a sample. The PIN length is taken from the sample.
pub fn extract_features(sample: &KeystrokeSample) -> Result<FeatureVector, FeatureError> {
    let layout = FeatureLayout::new(sample.events.len())?;
    sample.validate(layout.pin_length())?;
    let ev = &sample.events;
    let mut values = vec![0.0; layout.dim()];
    for (k, e) in ev.iter().enumerate() {
        values[layout.monograph(SlotKind::Hold, k)] = e.hold();
        values[layout.monograph(SlotKind::X, k)] = e.x;
        values[layout.monograph(SlotKind::Y, k)] = e.y;
        values[layout.monograph(SlotKind::Force, k)] = e.force();
    }
    for (j, pair) in ev.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        values[layout.digraph(SlotKind::Dd, j)] = b.press_time - a.press_time;
        values[layout.digraph(SlotKind::Ud, j)] = b.press_time - a.release_time;
        values[layout.digraph(SlotKind::Uu, j)] = b.release_time - a.release_time;
        values[layout.digraph(SlotKind::Du, j)] = b.release_time - a.press_time;
    }
    Ok(FeatureVector { layout, values })
}
