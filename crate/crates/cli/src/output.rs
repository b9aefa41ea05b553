//! Artifact naming and writing.
//!
//! Every artifact is named `<command>-<hash>.<ext>` where the hash covers the
//! effective inputs, so the same inputs always land in the same file with the
//! same bytes. Wall-clock data goes to a `.meta.json` sidecar only.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::CliError;

/// First 16 hex digits of the SHA-256 of `bytes`.
pub fn short_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn unix_seconds() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub struct Sink {
    dir: PathBuf,
    stem: String,
    written: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Meta<'a> {
    command: &'a str,
    input_hash: &'a str,
    version: &'a str,
    threads: Option<usize>,
    started_unix_s: f64,
    finished_unix_s: f64,
    artifacts: Vec<String>,
}

impl Sink {
    pub fn new(dir: &Path, command: &str, hash: &str) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Sink {
            dir: dir.to_path_buf(),
            stem: format!("{command}-{hash}"),
            written: Vec::new(),
        })
    }

    fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}{suffix}", self.stem))
    }

    pub fn write_bytes(&mut self, suffix: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let p = self.path(suffix);
        fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))?;
        self.written.push(p.clone());
        Ok(p)
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, suffix: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("serialisable output");
        text.push('\n');
        self.write_bytes(suffix, text.as_bytes())
    }

    pub fn write_csv<T: Serialize>(&mut self, suffix: &str, rows: &[T]) -> Result<PathBuf, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(|e| CliError::Numerical(format!("csv: {e}")))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Numerical(format!("csv: {e}")))?;
        self.write_bytes(suffix, &bytes)
    }

    /// Writes the sidecar and returns every artifact path, sidecar last.
    pub fn finish(
        mut self,
        command: &str,
        hash: &str,
        threads: Option<usize>,
        started: f64,
    ) -> Result<Vec<PathBuf>, CliError> {
        let meta = Meta {
            command,
            input_hash: hash,
            version: env!("CARGO_PKG_VERSION"),
            threads,
            started_unix_s: started,
            finished_unix_s: unix_seconds(),
            artifacts: self
                .written
                .iter()
                .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
                .collect(),
        };
        self.write_json(".meta.json", &meta)?;
        Ok(self.written)
    }
}
