//! Raw keystroke events and PIN-entry samples.
//!
//! Samples are exchanged as JSON Lines, one [`KeystrokeSample`] per line,
//! each carrying a `schema` version field.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Current version of the JSONL sample schema.
pub const SCHEMA_VERSION: u32 = 1;

/// Default PIN length: nine digits plus ENTER.
pub const DEFAULT_PIN_LENGTH: usize = 10;

/// Symbolic key label on the numeric keypad.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KeyId {
    Digit(u8),
    Enter,
}

impl fmt::Display for KeyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyId::Digit(d) => write!(f, "{d}"),
            KeyId::Enter => f.write_str("ENTER"),
        }
    }
}

impl std::str::FromStr for KeyId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ENTER" => Ok(KeyId::Enter),
            _ if s.len() == 1 && s.as_bytes()[0].is_ascii_digit() => {
                Ok(KeyId::Digit(s.as_bytes()[0] - b'0'))
            }
            _ => Err(format!("unknown key id {s:?}")),
        }
    }
}

impl Serialize for KeyId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for KeyId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One key press on the keypad.
///
/// `x` and `y` are the touch offset inside the pressed key's bounding box,
/// normalized to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyEvent {
    pub key_id: KeyId,
    pub press_time: f64,
    pub release_time: f64,
    pub x: f64,
    pub y: f64,
    pub pressure: f64,
    pub area: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Genuine,
    Imposter,
    #[default]
    Unlabeled,
}

/// A single PIN entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeystrokeSample {
    pub user_id: String,
    pub session_id: String,
    #[serde(default)]
    pub label: Label,
    pub events: Vec<KeyEvent>,
}

/// Invariant violation in a sample; names the offending event when there is one.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error("sample has {actual} events, expected {expected}")]
    WrongLength { expected: usize, actual: usize },
    #[error("event {index}: {field} is not finite")]
    NonFinite { index: usize, field: &'static str },
    #[error("event {index}: release_time precedes press_time")]
    ReleaseBeforePress { index: usize },
    #[error("event {index}: press_time does not strictly increase")]
    NonMonotonePress { index: usize },
    #[error("event {index}: {field} outside [0, 1]")]
    OffsetOutOfRange { index: usize, field: &'static str },
    #[error("event {index}: {field} is negative")]
    Negative { index: usize, field: &'static str },
}

impl SampleError {
    /// Index of the offending event, if the error concerns a single event.
    pub fn event_index(&self) -> Option<usize> {
        match *self {
            SampleError::WrongLength { .. } => None,
            SampleError::NonFinite { index, .. }
            | SampleError::ReleaseBeforePress { index }
            | SampleError::NonMonotonePress { index }
            | SampleError::OffsetOutOfRange { index, .. }
            | SampleError::Negative { index, .. } => Some(index),
        }
    }

    /// Name of the offending field.
    pub fn field(&self) -> &'static str {
        match *self {
            SampleError::WrongLength { .. } => "events",
            SampleError::NonFinite { field, .. }
            | SampleError::OffsetOutOfRange { field, .. }
            | SampleError::Negative { field, .. } => field,
            SampleError::ReleaseBeforePress { .. } => "release_time",
            SampleError::NonMonotonePress { .. } => "press_time",
        }
    }
}

impl KeyEvent {
    fn validate(&self, index: usize) -> Result<(), SampleError> {
        let fields = [
            ("press_time", self.press_time),
            ("release_time", self.release_time),
            ("x", self.x),
            ("y", self.y),
            ("pressure", self.pressure),
            ("area", self.area),
        ];
        for (field, v) in fields {
            if !v.is_finite() {
                return Err(SampleError::NonFinite { index, field });
            }
        }
        if self.release_time < self.press_time {
            return Err(SampleError::ReleaseBeforePress { index });
        }
        for (field, v) in [("x", self.x), ("y", self.y)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SampleError::OffsetOutOfRange { index, field });
            }
        }
        for (field, v) in [("pressure", self.pressure), ("area", self.area)] {
            if v < 0.0 {
                return Err(SampleError::Negative { index, field });
            }
        }
        Ok(())
    }

    pub fn hold(&self) -> f64 {
        self.release_time - self.press_time
    }

    pub fn force(&self) -> f64 {
        self.pressure * self.area
    }
}

impl KeystrokeSample {
    /// Check every sample invariant for a PIN of `pin_length` keys.
    pub fn validate(&self, pin_length: usize) -> Result<(), SampleError> {
        if self.events.len() != pin_length || self.events.is_empty() {
            return Err(SampleError::WrongLength {
                expected: pin_length,
                actual: self.events.len(),
            });
        }
        for (i, ev) in self.events.iter().enumerate() {
            ev.validate(i)?;
            if i > 0 && ev.press_time <= self.events[i - 1].press_time {
                return Err(SampleError::NonMonotonePress { index: i });
            }
        }
        Ok(())
    }
}

/// On-the-wire JSONL record: a sample plus the schema version.
#[derive(Debug, Serialize, Deserialize)]
struct Record<'a> {
    schema: u32,
    #[serde(flatten)]
    sample: std::borrow::Cow<'a, KeystrokeSample>,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: unsupported schema version {version}")]
    Schema { line: usize, version: u32 },
    #[error("line {line}: {source}")]
    Invalid {
        line: usize,
        #[source]
        source: SampleError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parse one JSON record, checking the schema version but not the sample invariants.
pub fn parse_record(text: &str) -> Result<KeystrokeSample, IngestError> {
    let rec: Record<'static> =
        serde_json::from_str(text).map_err(|source| IngestError::Json { line: 1, source })?;
    if rec.schema != SCHEMA_VERSION {
        return Err(IngestError::Schema {
            line: 1,
            version: rec.schema,
        });
    }
    Ok(rec.sample.into_owned())
}

/// Serialize a sample as a single JSONL line (without the trailing newline).
pub fn to_record(sample: &KeystrokeSample) -> String {
    let rec = Record {
        schema: SCHEMA_VERSION,
        sample: std::borrow::Cow::Borrowed(sample),
    };
    serde_json::to_string(&rec).expect("sample serialization is infallible")
}

/// Read and validate every sample in a JSONL stream. Blank lines are skipped.
pub fn read_jsonl<R: BufRead>(reader: R, pin_length: usize) -> Result<Vec<KeystrokeSample>, IngestError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let sample = parse_record(&line).map_err(|e| match e {
            IngestError::Json { source, .. } => IngestError::Json { line: lineno, source },
            IngestError::Schema { version, .. } => IngestError::Schema {
                line: lineno,
                version,
            },
            other => other,
        })?;
        sample
            .validate(pin_length)
            .map_err(|source| IngestError::Invalid { line: lineno, source })?;
        out.push(sample);
    }
    Ok(out)
}

pub fn write_jsonl<W: Write>(mut writer: W, samples: &[KeystrokeSample]) -> std::io::Result<()> {
    for s in samples {
        writer.write_all(to_record(s).as_bytes())?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}
