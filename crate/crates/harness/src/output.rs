//! Run directory writer and manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::HarnessError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the run directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub kind: String,
    pub started: String,
    pub finished: String,
    pub config: serde_json::Value,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn read(dir: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(dir.join(MANIFEST))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Io(std::io::Error::other(e)))
    }

    /// Recompute every digest; returns the paths that do not match.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>, HarnessError> {
        let mut bad = Vec::new();
        for f in &self.files {
            let data = fs::read(dir.join(&f.path))?;
            if data.len() as u64 != f.bytes || sha256_hex(&data) != f.sha256 {
                bad.push(f.path.clone());
            }
        }
        Ok(bad)
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

/// Sole writer for one run directory; records every file it emits.
pub struct RunWriter {
    root: PathBuf,
    files: Vec<FileEntry>,
}

impl RunWriter {
    pub fn create(root: &Path) -> Result<Self, HarnessError> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, data: &[u8]) -> Result<(), HarnessError> {
        if name == MANIFEST || self.files.iter().any(|f| f.path == name) {
            return Err(HarnessError::Io(std::io::Error::other(format!("duplicate output `{name}`"))));
        }
        fs::write(self.root.join(name), data)?;
        self.files.push(FileEntry { path: name.to_string(), bytes: data.len() as u64, sha256: sha256_hex(data) });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), HarnessError> {
        let mut data = serde_json::to_vec_pretty(value).map_err(|e| HarnessError::Numerical(e.to_string()))?;
        data.push(b'\n');
        self.write(name, &data)
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    pub fn finish(self, mut manifest: RunManifest) -> Result<RunManifest, HarnessError> {
        manifest.files = self.files;
        let mut data = serde_json::to_vec_pretty(&manifest).map_err(|e| HarnessError::Numerical(e.to_string()))?;
        data.push(b'\n');
        fs::write(self.root.join(MANIFEST), data)?;
        Ok(manifest)
    }
}

/// `4.4` → `4.4`, `12` → `12`; safe for file names.
pub fn temperature_tag(t: f64) -> String {
    format!("{t}")
}
