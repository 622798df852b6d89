//! Run manifest: what was computed, how, and the hash of every output file.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use woodpile_core::{Error, Result};

#[derive(Debug, Clone, Default, Serialize)]
pub struct StageRecord {
    pub name: String,
    /// `ok` or `failed`
    pub status: String,
    pub wall_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    /// Relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Resolution {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pwe_cutoff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plane_waves: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells_per_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_cells: Option<[usize; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub threads: usize,
    pub pwe_seed: u64,
    pub resolution: Resolution,
    pub stages: Vec<StageRecord>,
    pub files: Vec<FileRecord>,
}

impl Manifest {
    pub fn new(config_text: &str, threads: usize, pwe_seed: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: hex::encode(Sha256::digest(config_text.as_bytes())),
            threads,
            pwe_seed,
            resolution: Resolution::default(),
            stages: Vec::new(),
            files: Vec::new(),
        }
    }

    /// Hash `path` (inside `root`) and record it, replacing an earlier entry.
    pub fn add_file(&mut self, root: &Path, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let rel = path.strip_prefix(root).unwrap_or(path).display().to_string();
        self.files.retain(|f| f.path != rel);
        self.files.push(FileRecord {
            path: rel,
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.toml");
        std::fs::write(&path, self.to_toml()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
