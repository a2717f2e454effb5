//! Versioned JSON checkpoints: config, seed, step counter, and all
//! parameter tensors. Floats serialize at full round-trip precision, so a
//! load-save cycle is byte-identical.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::ModelParams;
use super::{ModelError, TrainConfig};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: TrainConfig,
    pub step: usize,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn new(config: TrainConfig, step: usize, params: ModelParams) -> Self {
        Self { version: CHECKPOINT_VERSION, config, step, params }
    }
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<(), ModelError> {
    let body = serde_json::to_string(checkpoint)
        .map_err(|e| ModelError::BadCheckpoint(e.to_string()))?;
    fs::write(path, body)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, ModelError> {
    let body = fs::read_to_string(path)?;
    let checkpoint: Checkpoint =
        serde_json::from_str(&body).map_err(|e| ModelError::BadCheckpoint(e.to_string()))?;
    if checkpoint.version != CHECKPOINT_VERSION {
        return Err(ModelError::BadCheckpoint(format!(
            "unsupported version {}, expected {}",
            checkpoint.version, CHECKPOINT_VERSION
        )));
    }
    checkpoint.params.validate()?;
    if checkpoint.params.hidden != checkpoint.config.hidden
        || checkpoint.params.vocab != checkpoint.config.vocab
    {
        return Err(ModelError::BadCheckpoint(
            "parameter shapes do not match the stored config".into(),
        ));
    }
    Ok(checkpoint)
}
