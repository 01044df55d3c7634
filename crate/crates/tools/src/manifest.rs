//! Run manifests: the fully resolved options of a run, its config hash and
//! digests of its inputs and outputs. No timestamps, so identical runs write
//! identical manifests.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{ToolError, ToolResult};
use crate::io;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> ToolResult<Self> {
        Ok(FileDigest {
            path: path.to_path_buf(),
            sha256: io::sha256_file(path)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub core_version: String,
    pub seed: u64,
    /// SHA-256 of the canonical JSON of `options`.
    pub config_hash: String,
    pub options: Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

/// SHA-256 of the compact JSON form. Object keys serialize sorted, so the
/// hash does not depend on how the options were written.
pub fn config_hash(options: &impl Serialize) -> ToolResult<String> {
    let v = serde_json::to_value(options).map_err(|e| ToolError::usage(e.to_string()))?;
    Ok(io::sha256_hex(v.to_string().as_bytes()))
}

impl Manifest {
    pub fn new(command: &str, seed: u64, options: &impl Serialize) -> ToolResult<Self> {
        Ok(Manifest {
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            core_version: asfnet_core::VERSION.into(),
            seed,
            config_hash: config_hash(options)?,
            options: serde_json::to_value(options).map_err(|e| ToolError::usage(e.to_string()))?,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn input(&mut self, path: &Path) -> ToolResult<()> {
        self.inputs.push(FileDigest::of(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> ToolResult<()> {
        self.outputs.push(FileDigest::of(path)?);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> ToolResult<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| ToolError::usage(e.to_string()))?;
        text.push('\n');
        io::write_bytes(path, text.as_bytes())
    }

    pub fn read(path: &Path) -> ToolResult<Self> {
        serde_json::from_str(&io::read_text(path)?).map_err(|e| ToolError::parse(path, e))
    }
}

/// Manifest location for an output: `dir/manifest.json` for directories,
/// `<file>.manifest.json` for files.
pub fn manifest_path(out: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        out.join("manifest.json")
    } else {
        io::with_suffix(out, ".manifest.json")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_key_order() {
        let a: Value = serde_json::from_str(r#"{"a": 1, "b": [1, 2]}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"b": [1, 2], "a": 1}"#).unwrap();
        assert_eq!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        let c: Value = serde_json::from_str(r#"{"b": [2, 1], "a": 1}"#).unwrap();
        assert_ne!(config_hash(&a).unwrap(), config_hash(&c).unwrap());
    }

    #[test]
    fn manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("x.txt");
        std::fs::write(&out, "hi").unwrap();
        let mut m = Manifest::new("demo", 3, &serde_json::json!({"seed": 3})).unwrap();
        m.output(&out).unwrap();
        let p = manifest_path(&out, false);
        m.write(&p).unwrap();
        assert_eq!(Manifest::read(&p).unwrap(), m);
        assert_eq!(manifest_path(dir.path(), true), dir.path().join("manifest.json"));
    }
}
