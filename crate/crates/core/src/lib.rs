//! Toolkit for detecting and quantifying dataset artifacts in natural
//! language inference corpora, evaluating predictions sliced by artifact
//! category, and training a small multi-head debiasing classifier with
//! hand-written, finite-difference-checked gradients.
//!
//! The crate is organized around five subsystems:
//!
//! - [`corpus`]: data model, tokenization, and JSONL ingestion/alignment
//! - [`artifacts`]: per-example artifact features, flags, prevalence, and
//!   co-occurrence counts
//! - [`metrics`]: confusion matrices, per-class statistics, error
//!   transitions, and bias-sliced accuracies
//! - [`model`]: hashed bag-of-words encoder with classification, length,
//!   overlap, and contrastive-projection heads trained under a weighted
//!   multi-task loss
//! - [`synth`]: synthetic corpus generation with controllable
//!   artifact-label correlation

pub mod artifacts;
pub mod corpus;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod synth;
