//! Run manifests and output staging.
//!
//! Outputs are collected in memory and only written once a command has
//! succeeded, followed by `manifest.json` describing the run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub command: String,
    /// Resolved configuration, without the output directory. Passing the
    /// manifest back as `--config` repeats the run.
    pub config: RunConfig,
    pub config_hash: String,
    pub seed: u64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> CliResult<FileDigest> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    Ok(FileDigest {
        path: path.to_path_buf(),
        sha256: sha256_hex(&bytes),
    })
}

/// Files a command will write, keyed by name inside the output directory.
#[derive(Default)]
pub struct Staged {
    files: Vec<(String, Vec<u8>)>,
}

impl Staged {
    pub fn add(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), bytes.into()));
    }

    /// Writes the staged files and the manifest.
    pub fn commit(
        self,
        command: &str,
        cfg: &RunConfig,
        inputs: &[PathBuf],
    ) -> CliResult<Vec<PathBuf>> {
        let dir = cfg.out_dir();
        let inputs = inputs
            .iter()
            .map(|p| digest_file(p))
            .collect::<CliResult<Vec<_>>>()?;
        fs::create_dir_all(&dir)
            .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))?;
        let mut outputs = Vec::new();
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            fs::write(&path, bytes)
                .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
            outputs.push(FileDigest {
                path,
                sha256: sha256_hex(bytes),
            });
        }
        let recorded = RunConfig {
            config: None,
            out_dir: None,
            ..cfg.clone()
        };
        let canonical = serde_json::to_vec(&recorded).expect("config serializes");
        let manifest = Manifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_hash: sha256_hex(&canonical),
            seed: cfg.seed(),
            config: recorded,
            inputs,
            outputs,
        };
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n")
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
        let mut written: Vec<PathBuf> = manifest.outputs.into_iter().map(|f| f.path).collect();
        written.push(path);
        Ok(written)
    }
}
