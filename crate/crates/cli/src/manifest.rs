//! Run manifest: configuration hash, emitted files and timings.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::run::RunError;

pub const MANIFEST_SCHEMA: &str = "emkm-manifest/1";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const BINARY_SCHEMA: &str = "emkm-binary/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory.
    pub path: String,
    pub kind: String,
    pub schema: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub tool_version: String,
    /// Hex SHA-256 of the canonical configuration text.
    pub config_hash: String,
    pub files: Vec<FileEntry>,
    pub timings: Vec<Timing>,
}

pub fn config_hash(canonical: &str) -> String {
    Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl RunManifest {
    pub fn new(canonical_config: &str, files: Vec<FileEntry>, timings: Vec<Timing>) -> Self {
        Self {
            schema: MANIFEST_SCHEMA.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config_hash(canonical_config),
            files,
            timings,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), RunError> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|source| RunError::Io { path, source })
    }

    pub fn read(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path).map_err(|source| RunError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| RunError::Io {
            path: path.to_path_buf(),
            source: e.into(),
        })
    }

    /// Human-readable summary of the manifest and, when present next to
    /// it, the run report.
    pub fn summary(&self, dir: &Path) -> String {
        let mut s = format!("config {}\n", self.config_hash);
        for f in &self.files {
            s += &format!("  {:<10} {} ({})\n", f.kind, f.path, f.schema);
        }
        for t in &self.timings {
            s += &format!("  {:<24} {:.3} s\n", t.stage, t.seconds);
        }
        if let Ok(report) = fs::read_to_string(dir.join("report.txt")) {
            for line in report.lines().filter(|l| !l.starts_with('#')).skip(1) {
                s += &format!("  {}\n", line.replace(',', "  "));
            }
        }
        s
    }
}
