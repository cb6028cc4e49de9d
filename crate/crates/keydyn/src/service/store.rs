//! File-backed enrollment store.
//!
//! ```text
//! <root>/users/<id>/samples.jsonl   append-only enrollment log
//! <root>/users/<id>/window.json     buffer history for authentication
//! <root>/users/<id>/model/          see `artifacts`
//! <root>/audit.jsonl                one row per authentication
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use keydyn_core::sample::{parse_record, to_record, KeystrokeSample};

use crate::artifacts::write_atomic;

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

pub fn valid_user_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEvent {
    pub timestamp_ms: u128,
    pub user: String,
    pub score: f64,
    pub decision_value: f64,
    pub verdict: String,
    /// `info` for accepted attempts, `alert` for rejected ones.
    pub severity: String,
    pub image_id: Option<String>,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> std::io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("users"))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn user_dir(&self, id: &str) -> PathBuf {
        self.root.join("users").join(id)
    }

    pub fn model_dir(&self, id: &str) -> PathBuf {
        self.user_dir(id).join("model")
    }

    fn samples_path(&self, id: &str) -> PathBuf {
        self.user_dir(id).join("samples.jsonl")
    }

    pub fn audit_path(&self) -> PathBuf {
        self.root.join("audit.jsonl")
    }

    /// Append one sample as a single write of a complete line.
    pub fn append_sample(&self, id: &str, sample: &KeystrokeSample) -> std::io::Result<()> {
        fs::create_dir_all(self.user_dir(id))?;
        let path = self.samples_path(id);
        let mut f = OpenOptions::new().create(true).append(true).open(&path)?;
        let mut line = to_record(sample);
        line.push('\n');
        // a previous crash may have left a partial line; start a fresh one
        if needs_newline(&path)? {
            line.insert(0, '\n');
        }
        f.write_all(line.as_bytes())?;
        f.sync_data()
    }

    /// Every complete record of the user's log. A torn trailing line is skipped
    /// with a warning; a malformed line elsewhere is skipped likewise.
    pub fn read_samples(&self, id: &str) -> std::io::Result<Vec<KeystrokeSample>> {
        let path = self.samples_path(id);
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e),
        };
        let mut out = Vec::new();
        let mut reader = BufReader::new(file);
        let mut buf = String::new();
        let mut lineno = 0;
        loop {
            buf.clear();
            if reader.read_line(&mut buf)? == 0 {
                break;
            }
            lineno += 1;
            let complete = buf.ends_with('\n');
            let text = buf.trim();
            if text.is_empty() {
                continue;
            }
            if !complete {
                log::warn!("{}: ignoring partial trailing line {lineno}", path.display());
                break;
            }
            match parse_record(text) {
                Ok(s) => out.push(s),
                Err(e) => log::warn!("{}: skipping line {lineno}: {e}", path.display()),
            }
        }
        Ok(out)
    }

    /// Ids of users with an enrollment log, sorted.
    pub fn users(&self) -> std::io::Result<Vec<String>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(self.root.join("users"))? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if valid_user_id(&name) && entry.path().join("samples.jsonl").exists() {
                out.push(name);
            }
        }
        out.sort();
        Ok(out)
    }

    pub fn save_window(&self, id: &str, window: &[Vec<f64>]) -> std::io::Result<()> {
        fs::create_dir_all(self.user_dir(id))?;
        let bytes = serde_json::to_vec(window).map_err(std::io::Error::other)?;
        write_atomic(&self.user_dir(id).join("window.json"), &bytes)
    }

    pub fn load_window(&self, id: &str) -> Option<Vec<Vec<f64>>> {
        let bytes = fs::read(self.user_dir(id).join("window.json")).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    pub fn append_audit(&self, event: &AuditEvent) -> std::io::Result<()> {
        let mut line = serde_json::to_string(event).map_err(std::io::Error::other)?;
        line.push('\n');
        let path = self.audit_path();
        if needs_newline(&path)? {
            line.insert(0, '\n');
        }
        let mut f = OpenOptions::new().create(true).append(true).open(path)?;
        f.write_all(line.as_bytes())?;
        f.sync_data()
    }

    pub fn read_audit(&self) -> std::io::Result<Vec<AuditEvent>> {
        let text = match fs::read_to_string(self.audit_path()) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e),
        };
        Ok(text.lines().filter_map(|l| serde_json::from_str(l).ok()).collect())
    }
}

/// True when the file exists, is non-empty and does not end in a newline.
fn needs_newline(path: &Path) -> std::io::Result<bool> {
    use std::io::{Read, Seek, SeekFrom};
    let mut f = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(false),
        Err(e) => return Err(e),
    };
    if f.metadata()?.len() == 0 {
        return Ok(false);
    }
    f.seek(SeekFrom::End(-1))?;
    let mut last = [0u8; 1];
    f.read_exact(&mut last)?;
    Ok(last[0] != b'\n')
}

#[cfg(test)]
mod tests {
    use super::*;
    use keydyn_core::sample::{KeyEvent, KeyId, Label};

    fn sample() -> KeystrokeSample {
        KeystrokeSample {
            user_id: "alice".into(),
            session_id: "s".into(),
            label: Label::Genuine,
            events: (0..3)
                .map(|i| KeyEvent {
                    key_id: KeyId::Digit(i),
                    press_time: i as f64 * 100.0,
                    release_time: i as f64 * 100.0 + 50.0,
                    x: 0.5,
                    y: 0.5,
                    pressure: 0.5,
                    area: 1.0,
                })
                .collect(),
        }
    }

    #[test]
    fn torn_line_is_ignored_and_repaired() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        store.append_sample("alice", &sample()).unwrap();
        store.append_sample("alice", &sample()).unwrap();
        let path = store.samples_path("alice");
        let full = to_record(&sample());
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(&full.as_bytes()[..full.len() / 2]).unwrap();
        drop(f);
        assert_eq!(store.read_samples("alice").unwrap().len(), 2);
        store.append_sample("alice", &sample()).unwrap();
        assert_eq!(store.read_samples("alice").unwrap().len(), 3);
        assert_eq!(store.users().unwrap(), vec!["alice".to_string()]);
    }

    #[test]
    fn user_ids() {
        assert!(valid_user_id("user_01-a"));
        assert!(!valid_user_id("../etc"));
        assert!(!valid_user_id(""));
    }
}
