//! Command-line entry point tying ingestion, profiling, training,
//! evaluation, and report emission into reproducible runs.
//!
//! Exit codes: 0 success, 1 validation or contract failure (including
//! flag errors), 2 I/O failure.

mod commands;
mod manifest;

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Validation(String),
}

impl CliError {
    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Io(format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> i32 {
        match self {
            Self::Io(_) => 2,
            Self::Validation(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Io(msg) => write!(f, "i/o error: {msg}"),
            Self::Validation(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<nli_artifacts::corpus::CorpusError> for CliError {
    fn from(e: nli_artifacts::corpus::CorpusError) -> Self {
        match e {
            nli_artifacts::corpus::CorpusError::Io(inner) => Self::Io(inner.to_string()),
            other => Self::Validation(other.to_string()),
        }
    }
}

impl From<nli_artifacts::artifacts::ArtifactsError> for CliError {
    fn from(e: nli_artifacts::artifacts::ArtifactsError) -> Self {
        Self::Validation(e.to_string())
    }
}

impl From<nli_artifacts::metrics::MetricsError> for CliError {
    fn from(e: nli_artifacts::metrics::MetricsError) -> Self {
        Self::Validation(e.to_string())
    }
}

impl From<nli_artifacts::model::ModelError> for CliError {
    fn from(e: nli_artifacts::model::ModelError) -> Self {
        match e {
            nli_artifacts::model::ModelError::Io(inner) => Self::Io(inner.to_string()),
            other => Self::Validation(other.to_string()),
        }
    }
}

impl From<nli_artifacts::synth::SynthError> for CliError {
    fn from(e: nli_artifacts::synth::SynthError) -> Self {
        Self::Validation(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "nliart",
    version,
    about = "Dataset-artifact profiling, bias-sliced evaluation, and debiasing experiments for NLI corpora"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Profile artifact features and flags for an examples file
    Profile(ProfileArgs),
    /// Evaluate predictions against gold labels, sliced by artifact
    Evaluate(EvaluateArgs),
    /// Train the multi-head debiasing model
    Train(TrainArgs),
    /// Run a trained checkpoint over an examples file
    Predict(PredictArgs),
    /// Generate a synthetic corpus with controlled artifact bias
    Synth(SynthArgs),
}

#[derive(Args)]
struct ThresholdArgs {
    /// Minimum |premise - hypothesis| token difference for the length flag
    #[arg(long = "length-min", default_value_t = 5)]
    length_min: u32,
    /// Minimum overlap score for the overlap flag
    #[arg(long = "overlap-min", default_value_t = 0.8)]
    overlap_min: f64,
}

#[derive(Args)]
struct ProfileArgs {
    /// Examples file (JSON lines)
    #[arg(long)]
    examples: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    thresholds: ThresholdArgs,
    /// Replace the built-in negation lexicon (one cue token per line)
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Also scan premise tokens for negation cues
    #[arg(long = "negation-in-premise", default_value_t = false)]
    negation_in_premise: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    examples: PathBuf,
    /// Predictions file (JSON lines with id and probs)
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    thresholds: ThresholdArgs,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    examples: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// JSON training config; command-line flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long = "batch-size")]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long = "lambda-len")]
    lambda_len: Option<f64>,
    #[arg(long = "lambda-ov")]
    lambda_ov: Option<f64>,
    #[arg(long = "lambda-con")]
    lambda_con: Option<f64>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    vocab: Option<usize>,
    /// Gradient accumulation steps per optimizer update
    #[arg(long)]
    accum: Option<usize>,
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long = "eval-every")]
    eval_every: Option<usize>,
    #[arg(long = "weight-decay")]
    weight_decay: Option<f64>,
    #[arg(long = "clip-norm")]
    clip_norm: Option<f64>,
    /// Iterate examples in file order instead of shuffling per epoch
    #[arg(long = "no-shuffle", default_value_t = false)]
    no_shuffle: bool,
    /// Contrastive formula: "literal" or "infonce"
    #[arg(long)]
    contrastive: Option<String>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    examples: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Artifact-label correlation in the training split, in [1/3, 1]
    #[arg(long, default_value_t = 0.9)]
    bias: f64,
    #[arg(long = "n-train", default_value_t = 8000)]
    n_train: usize,
    /// Examples per test split
    #[arg(long = "n-test", default_value_t = 2000)]
    n_test: usize,
    #[arg(long = "mix-length", default_value_t = 1.0)]
    mix_length: f64,
    #[arg(long = "mix-overlap", default_value_t = 1.0)]
    mix_overlap: f64,
    #[arg(long = "mix-negation", default_value_t = 1.0)]
    mix_negation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Parse arguments, dispatch, and map errors to the documented exit codes.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Profile(args) => commands::profile(args),
        Command::Evaluate(args) => commands::evaluate(args),
        Command::Train(args) => commands::train(args),
        Command::Predict(args) => commands::predict(args),
        Command::Synth(args) => commands::synth(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
