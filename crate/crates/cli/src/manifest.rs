//! Run manifests and manifest-stamped output files.
//!
//! The manifest hash covers the tool version, the subcommand, every flag
//! value and the content digest of every input file. Output locations and
//! the thread count are left out, so two runs that differ only in where
//! they write (or how many workers they use) share a hash and, by the
//! determinism guarantee, produce identical bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use bngeom_core::io::{Checkpoint, Table, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
use serde::Serialize;

use crate::error::{CliError, Result};

pub const TOOL_NAME: &str = "bngeom";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct InputFile {
    pub flag: String,
    /// File name only; directories do not enter the manifest.
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct ExperimentManifest {
    pub tool: String,
    pub tool_version: String,
    pub manifest_version: u32,
    pub checkpoint_format: String,
    pub checkpoint_version: u32,
    pub subcommand: String,
    pub flags: BTreeMap<String, serde_json::Value>,
    pub seeds: Vec<u64>,
    pub inputs: Vec<InputFile>,
    pub outputs: Vec<String>,
    pub config_hash: String,
}

impl ExperimentManifest {
    /// `flags` is any serializable flag set; fields holding paths should be
    /// skipped by the caller and registered with [`Self::add_input`].
    pub fn new(subcommand: &str, flags: &impl Serialize, seeds: Vec<u64>) -> Result<Self> {
        let value = serde_json::to_value(flags).map_err(|e| CliError::Usage(e.to_string()))?;
        let flags = match value {
            serde_json::Value::Object(m) => m.into_iter().collect(),
            serde_json::Value::Null => BTreeMap::new(),
            other => BTreeMap::from([("value".to_string(), other)]),
        };
        let mut m = Self {
            tool: TOOL_NAME.into(),
            tool_version: TOOL_VERSION.into(),
            manifest_version: MANIFEST_VERSION,
            checkpoint_format: CHECKPOINT_FORMAT.into(),
            checkpoint_version: CHECKPOINT_VERSION,
            subcommand: subcommand.into(),
            flags,
            seeds,
            inputs: Vec::new(),
            outputs: Vec::new(),
            config_hash: String::new(),
        };
        m.rehash();
        Ok(m)
    }

    pub fn add_input(&mut self, flag: &str, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.inputs.push(InputFile {
            flag: flag.into(),
            name: file_name(path),
            sha256: bngeom_core::sha256_hex(&bytes),
        });
        self.rehash();
        Ok(())
    }

    fn rehash(&mut self) {
        #[derive(Serialize)]
        struct Key<'a> {
            tool_version: &'a str,
            manifest_version: u32,
            checkpoint_version: u32,
            subcommand: &'a str,
            flags: &'a BTreeMap<String, serde_json::Value>,
            seeds: &'a [u64],
            inputs: &'a [InputFile],
        }
        let key = Key {
            tool_version: &self.tool_version,
            manifest_version: self.manifest_version,
            checkpoint_version: self.checkpoint_version,
            subcommand: &self.subcommand,
            flags: &self.flags,
            seeds: &self.seeds,
            inputs: &self.inputs,
        };
        let text = serde_json::to_string(&key).expect("manifest key serializes");
        self.config_hash = bngeom_core::sha256_hex(text.as_bytes())[..16].to_string();
    }

    pub fn hash(&self) -> &str {
        &self.config_hash
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Writes files stamped with the manifest hash and records their names.
#[derive(Debug)]
pub struct Output {
    pub manifest: ExperimentManifest,
    written: Vec<PathBuf>,
}

impl Output {
    pub fn new(manifest: ExperimentManifest) -> Self {
        Self {
            manifest,
            written: Vec::new(),
        }
    }

    pub fn hash(&self) -> String {
        self.manifest.config_hash.clone()
    }

    fn put(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        }
        std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.manifest.outputs.push(file_name(path));
        self.written.push(path.to_path_buf());
        Ok(())
    }

    pub fn table(&mut self, path: &Path, table: &Table) -> Result<()> {
        let text = table.to_csv(Some(&self.hash()))?;
        self.put(path, text.as_bytes())
    }

    /// SVG with the hash in a comment after the XML declaration.
    pub fn svg(&mut self, path: &Path, svg: &str) -> Result<()> {
        let comment = format!("<!-- manifest {} -->\n", self.hash());
        let text = match svg.find('\n') {
            Some(i) => format!("{}{comment}{}", &svg[..=i], &svg[i + 1..]),
            None => format!("{comment}{svg}"),
        };
        self.put(path, text.as_bytes())
    }

    pub fn checkpoint(&mut self, path: &Path, ckpt: &Checkpoint) -> Result<()> {
        let mut c = ckpt.clone();
        c.meta.manifest = Some(self.hash());
        let text = c.to_json()?;
        self.put(path, text.as_bytes())
    }

    pub fn matrix(&mut self, path: &Path, m: &ndarray::Array2<f64>) -> Result<()> {
        let text = bngeom_core::io::matrix_to_csv(m, Some(&self.hash()));
        self.put(path, text.as_bytes())
    }

    /// Writes `manifest_path` and returns every file written, manifest last.
    pub fn finish(mut self, manifest_path: &Path) -> Result<Vec<PathBuf>> {
        let text = self.manifest.to_json();
        if let Some(dir) = manifest_path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(manifest_path, text).map_err(|e| CliError::Io(format!("{}: {e}", manifest_path.display())))?;
        self.written.push(manifest_path.to_path_buf());
        Ok(self.written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Flags {
        seed: u64,
        width: usize,
    }

    #[test]
    fn hash_depends_on_flags_only() {
        let a = ExperimentManifest::new("x", &Flags { seed: 1, width: 2 }, vec![1]).unwrap();
        let b = ExperimentManifest::new("x", &Flags { seed: 1, width: 2 }, vec![1]).unwrap();
        let c = ExperimentManifest::new("x", &Flags { seed: 2, width: 2 }, vec![2]).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 16);
    }
}
