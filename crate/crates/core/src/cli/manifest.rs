//! Run manifests: resolved configuration, input digests, and timing for
//! every command invocation.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::CliError;

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// One manifest is written per output directory. Primary outputs are
/// byte-reproducible given the same inputs and seed; the manifest itself
/// carries the wall-clock duration and is not.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub toolkit_version: String,
    pub seed: Option<u64>,
    pub resolved_config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub duration_seconds: f64,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, resolved_config: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            resolved_config,
            inputs: Vec::new(),
            duration_seconds: 0.0,
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    pub fn write(&self, out_dir: &Path) -> Result<PathBuf, CliError> {
        let path = out_dir.join("manifest.json");
        let body = serde_json::to_string_pretty(self).expect("manifest serialization");
        fs::write(&path, body + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
