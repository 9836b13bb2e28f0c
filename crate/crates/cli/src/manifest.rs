use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

/// Written as `manifest.json` into every output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Settings after merging the config file, flags and defaults.
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<FileDigest>,
    /// Paths relative to the output directory.
    pub outputs: Vec<FileDigest>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of a file, or of a directory as the hash of its sorted
/// `(relative path, file digest)` list.
pub fn digest_input(path: &Path) -> Result<FileDigest> {
    let meta = fs::metadata(path).with_context(|| format!("reading {}", path.display()))?;
    let sha256 = if meta.is_dir() {
        let mut h = Sha256::new();
        for entry in WalkDir::new(path).sort_by_file_name() {
            let entry = entry?;
            if entry.file_type().is_file() {
                let rel = entry.path().strip_prefix(path)?.to_string_lossy().replace('\\', "/");
                h.update(rel.as_bytes());
                h.update([0]);
                h.update(Sha256::digest(fs::read(entry.path())?));
            }
        }
        hex::encode(h.finalize())
    } else {
        sha256_hex(&fs::read(path)?)
    };
    Ok(FileDigest { path: path.display().to_string(), sha256 })
}
