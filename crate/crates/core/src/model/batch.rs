//! Batch construction: hashed token ids plus regression targets.

use super::{hash_token, ModelError, TrainConfig};
use crate::artifacts::overlap_score;
use crate::corpus::{tokenize, Example, Label};

/// One training example in model form.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchItem {
    pub premise_ids: Vec<usize>,
    pub hypothesis_ids: Vec<usize>,
    pub gold: Label,
    /// Scaled, clipped (prem_len - hyp_len) regression target.
    pub length_target: f64,
    /// Unique-token overlap of hypothesis with premise, in [0, 1].
    pub overlap_target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub items: Vec<BatchItem>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.items.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        for item in &self.items {
            if !item.length_target.is_finite() || !item.overlap_target.is_finite() {
                return Err(ModelError::BadConfig("batch targets must be finite".into()));
            }
        }
        Ok(())
    }

    /// Tokenize, hash, and attach regression targets for every example.
    pub fn from_examples(examples: &[Example], config: &TrainConfig) -> Result<Batch, ModelError> {
        if examples.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        let items = examples
            .iter()
            .map(|e| {
                let prem = tokenize(&e.premise);
                let hyp = tokenize(&e.hypothesis);
                let raw_diff = prem.len() as f64 - hyp.len() as f64;
                let length_target = (raw_diff / config.length_target_scale)
                    .clamp(-config.length_target_clip, config.length_target_clip);
                BatchItem {
                    premise_ids: prem.iter().map(|t| hash_token(t, config.vocab)).collect(),
                    hypothesis_ids: hyp.iter().map(|t| hash_token(t, config.vocab)).collect(),
                    gold: e.gold,
                    length_target,
                    overlap_target: overlap_score(&prem, &hyp),
                }
            })
            .collect();
        Ok(Batch { items })
    }
}
