//! Run manifests: enough to replay an experiment and to check that its
//! output files are the ones it produced.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::io::{records_digest, write_atomic};
use crate::lab::ExperimentConfig;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDS_FILE: &str = "records.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileDigest {
    /// Path relative to the manifest's directory.
    pub file: String,
    /// SHA-256 of the file with the `wall_ms` column removed.
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub version: String,
    pub master_seed: u64,
    /// The config as run, with any seed override applied.
    pub config: ExperimentConfig,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    pub files: Vec<FileDigest>,
}

pub fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(config: &ExperimentConfig, started_unix_ms: u64) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: config.master_seed,
            config: config.clone(),
            started_unix_ms,
            finished_unix_ms: started_unix_ms,
            files: Vec::new(),
        }
    }

    /// Records the digest of a written records file.
    pub fn add_file(&mut self, name: &str, contents: &str) {
        self.files.push(FileDigest {
            file: name.to_string(),
            sha256: records_digest(contents),
        });
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut text =
            serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        text.push('\n');
        write_atomic(&dir.join(MANIFEST_FILE), &text)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{MANIFEST_FILE}: {e}")))
    }

    /// Recomputes every listed digest. Returns the files whose content no
    /// longer matches.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>> {
        if self.files.is_empty() {
            return Err(invalid("manifest lists no files"));
        }
        let mut mismatched = Vec::new();
        for f in &self.files {
            let text = std::fs::read_to_string(dir.join(&f.file))?;
            if records_digest(&text) != f.sha256 {
                mismatched.push(f.file.clone());
            }
        }
        Ok(mismatched)
    }
}
