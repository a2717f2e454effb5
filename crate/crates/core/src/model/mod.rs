//! From-scratch multi-head debiasing model: a hashed bag-of-words encoder
//! shared by a 3-way classification head, a length-difference regressor,
//! an overlap regressor, and a contrastive projection head over the
//! hypothesis representation. Training minimizes
//!
//! ```text
//! total = ce + lambda_len * length_mse + lambda_ov * overlap_mse
//!            + lambda_con * contrastive
//! ```
//!
//! All arithmetic is 64-bit and single-threaded; gradients are analytic
//! and checked against central finite differences in the test suite.

mod backward;
mod batch;
mod checkpoint;
mod forward;
mod optim;
mod params;
mod train;
mod vocab;

pub use backward::backward;
pub use batch::{Batch, BatchItem};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use forward::{contrastive_loss, encode, forward, EncodeOutput, ForwardOutput};
pub use optim::{global_grad_norm, optimizer_step, schedule_factor, OptimizerState};
pub use params::{Gradients, ModelParams, TensorRole};
pub use train::{predict, train, HistoryEntry, TrainResult};
pub use vocab::hash_token;

use std::fmt;

use serde::{Deserialize, Serialize};

/// Which contrastive objective the loss uses.
///
/// `Literal` follows the printed formula exactly: masked-out negative
/// entries are zeroed and still contribute exp(0) = 1 to the denominator.
/// `InfoNce` is the standard form whose denominator sums exp similarities
/// over all non-self entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContrastiveVariant {
    Literal,
    InfoNce,
}

/// Training hyperparameters. Desk-scale defaults keep runs in seconds;
/// `hidden: 256`, `learning_rate: 2e-5`, and `warmup_steps: 1000` mirror
/// the reference configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden: usize,
    pub vocab: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub clip_norm: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub accumulation_steps: usize,
    pub warmup_steps: usize,
    pub lambda_length: f64,
    pub lambda_overlap: f64,
    pub lambda_contrastive: f64,
    pub temperature: f64,
    pub seed: u64,
    /// Record a history entry every this many optimizer steps.
    pub eval_every: usize,
    pub shuffle: bool,
    /// Length targets are (prem_len - hyp_len) / length_target_scale,
    /// clipped to +/- length_target_clip, keeping the MSE term on the same
    /// footing as cross-entropy.
    pub length_target_scale: f64,
    pub length_target_clip: f64,
    pub contrastive_variant: ContrastiveVariant,
    /// Treat temperature as a trainable parameter instead of a constant.
    pub learn_temperature: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            vocab: 4096,
            learning_rate: 1e-3,
            weight_decay: 0.01,
            clip_norm: 1.0,
            epochs: 5,
            batch_size: 32,
            accumulation_steps: 2,
            warmup_steps: 50,
            lambda_length: 0.05,
            lambda_overlap: 0.05,
            lambda_contrastive: 0.05,
            temperature: 1.0,
            seed: 0,
            eval_every: 50,
            shuffle: true,
            length_target_scale: 10.0,
            length_target_clip: 3.0,
            contrastive_variant: ContrastiveVariant::Literal,
            learn_temperature: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.hidden == 0 || self.hidden % 2 != 0 {
            return Err(ModelError::BadConfig(format!(
                "hidden size must be a positive even number, got {}",
                self.hidden
            )));
        }
        if self.vocab == 0 {
            return Err(ModelError::BadConfig("vocab size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(ModelError::BadConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.weight_decay < 0.0 {
            return Err(ModelError::BadConfig("weight decay must be non-negative".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(ModelError::BadConfig("clip norm must be positive".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.eval_every == 0 {
            return Err(ModelError::BadConfig(
                "epochs, batch_size, and eval_every must be positive".into(),
            ));
        }
        if self.accumulation_steps == 0 {
            return Err(ModelError::BadConfig("accumulation_steps must be >= 1".into()));
        }
        if self.lambda_length < 0.0 || self.lambda_overlap < 0.0 || self.lambda_contrastive < 0.0
        {
            return Err(ModelError::BadConfig("loss weights must be non-negative".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(ModelError::BadTemperature(self.temperature));
        }
        if !(self.length_target_scale > 0.0) || !(self.length_target_clip > 0.0) {
            return Err(ModelError::BadConfig(
                "length target scale and clip must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Scalar loss terms from one forward pass. `total` is the exact weighted
/// sum of the components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ce: f64,
    pub length_mse: f64,
    pub overlap_mse: f64,
    pub contrastive: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub(crate) fn combine(
        ce: f64,
        length_mse: f64,
        overlap_mse: f64,
        contrastive: f64,
        config: &TrainConfig,
    ) -> Self {
        Self {
            ce,
            length_mse,
            overlap_mse,
            contrastive,
            total: ce
                + config.lambda_length * length_mse
                + config.lambda_overlap * overlap_mse
                + config.lambda_contrastive * contrastive,
        }
    }
}

#[derive(Debug)]
pub enum ModelError {
    BadConfig(String),
    BadTemperature(f64),
    EmptyBatch,
    NonFinite { head: &'static str },
    ShapeMismatch { what: &'static str, expected: usize, got: usize },
    CorpusTooSmall { examples: usize, batch_size: usize },
    BadCheckpoint(String),
    Io(std::io::Error),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BadConfig(msg) => write!(f, "invalid training config: {msg}"),
            Self::BadTemperature(t) => write!(f, "temperature must be > 0, got {t}"),
            Self::EmptyBatch => write!(f, "batch must contain at least one example"),
            Self::NonFinite { head } => {
                write!(f, "non-finite activation in the {head} head")
            }
            Self::ShapeMismatch { what, expected, got } => {
                write!(f, "shape mismatch in {what}: expected {expected}, got {got}")
            }
            Self::CorpusTooSmall { examples, batch_size } => write!(
                f,
                "corpus has {examples} example(s), smaller than one batch of {batch_size}; \
                 reduce batch_size"
            ),
            Self::BadCheckpoint(msg) => write!(f, "invalid checkpoint: {msg}"),
            Self::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for ModelError {}

impl From<std::io::Error> for ModelError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}
