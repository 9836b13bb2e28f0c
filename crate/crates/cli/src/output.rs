use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::manifest::{digest_input, sha256_hex, FileDigest, RunManifest};

pub const MANIFEST: &str = "manifest.json";

/// An output directory that remembers what was written to it.
pub struct OutDir {
    root: PathBuf,
    outputs: BTreeMap<String, String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<OutDir> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(OutDir { root: root.to_path_buf(), outputs: BTreeMap::new() })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn write_lines<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let mut bytes = Vec::new();
        abkit_core::jsonl::write_json_lines(&mut bytes, rows)?;
        self.write(name, &bytes)
    }

    pub fn write_csv<R: Serialize>(&mut self, name: &str, rows: &[R]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
        self.write(name, &bytes)
    }

    /// Writes the manifest and returns it.
    pub fn finish(
        mut self,
        command: &str,
        config: &impl Serialize,
        seeds: Vec<u64>,
        inputs: &[&Path],
    ) -> Result<RunManifest> {
        let manifest = RunManifest {
            tool: "abkit".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: serde_json::to_value(config)?,
            seeds,
            inputs: inputs.iter().map(|p| digest_input(p)).collect::<Result<_>>()?,
            outputs: self
                .outputs
                .iter()
                .map(|(path, sha256)| FileDigest { path: path.clone(), sha256: sha256.clone() })
                .collect(),
        };
        self.outputs.clear();
        self.write_json(MANIFEST, &manifest)?;
        Ok(manifest)
    }
}
