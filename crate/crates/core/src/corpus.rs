//! Canonical data model, tokenization, and ingestion/alignment of example
//! and prediction files.
//!
//! Examples and predictions travel as line-delimited JSON (one object per
//! line). Examples carry `premise`, `hypothesis`, `label` and an optional
//! `id`; predictions carry `id` and a 3-entry `probs` vector. Tokenization
//! is word-level: lowercase, punctuation-stripped, whitespace-split.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

/// The three NLI labels with stable integer codes 0/1/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Entailment,
    Neutral,
    Contradiction,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Entailment, Label::Neutral, Label::Contradiction];

    /// Stable integer code used for vector indexing.
    pub fn code(self) -> usize {
        match self {
            Label::Entailment => 0,
            Label::Neutral => 1,
            Label::Contradiction => 2,
        }
    }

    pub fn from_code(code: usize) -> Option<Label> {
        Label::ALL.get(code).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Entailment => "entailment",
            Label::Neutral => "neutral",
            Label::Contradiction => "contradiction",
        }
    }

    fn parse(s: &str) -> Option<Label> {
        match s {
            "entailment" => Some(Label::Entailment),
            "neutral" => Some(Label::Neutral),
            "contradiction" => Some(Label::Contradiction),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One NLI item: premise text, hypothesis text, gold label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub id: String,
    pub premise: String,
    pub hypothesis: String,
    pub gold: Label,
}

/// Ordered list of lowercase tokens. No token is empty or contains
/// whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }

    /// Set of distinct tokens.
    pub fn unique(&self) -> HashSet<&str> {
        self.0.iter().map(|t| t.as_str()).collect()
    }
}

/// Model output for one example: argmax label plus the full 3-class
/// probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub id: String,
    pub predicted: Label,
    pub probs: [f64; 3],
}

impl Prediction {
    /// Confidence is the maximum class probability.
    pub fn confidence(&self) -> f64 {
        self.probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Argmax with ties broken toward the lowest label code.
pub fn argmax_label(probs: &[f64; 3]) -> Label {
    let mut best = 0;
    for k in 1..3 {
        if probs[k] > probs[best] {
            best = k;
        }
    }
    Label::from_code(best).unwrap()
}

/// Counts reported alongside a loaded corpus.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SkipReport {
    pub loaded: usize,
    /// Records whose gold label was "-" (unlabeled) and were skipped.
    pub skipped_unlabeled: usize,
}

#[derive(Debug)]
pub enum CorpusError {
    Io(std::io::Error),
    Malformed { line: usize, message: String },
    UnknownLabel { line: usize, value: String },
    EmptyField { line: usize, field: &'static str },
    BadProbs { line: usize, message: String },
    DuplicateId { id: String },
    UnknownPredictionId { id: String },
    MissingPredictions { ids: Vec<String>, total: usize },
}

impl fmt::Display for CorpusError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Io(e) => write!(f, "i/o error: {e}"),
            Self::Malformed { line, message } => {
                write!(f, "malformed record at line {line}: {message}")
            }
            Self::UnknownLabel { line, value } => {
                write!(f, "unknown label '{value}' at line {line}")
            }
            Self::EmptyField { line, field } => {
                write!(f, "empty {field} at line {line}")
            }
            Self::BadProbs { line, message } => {
                write!(f, "invalid probs at line {line}: {message}")
            }
            Self::DuplicateId { id } => write!(f, "duplicate id '{id}'"),
            Self::UnknownPredictionId { id } => {
                write!(f, "prediction id '{id}' does not match any example")
            }
            Self::MissingPredictions { ids, total } => {
                write!(
                    f,
                    "{total} example(s) have no prediction; missing ids: {}",
                    ids.join(", ")
                )
            }
        }
    }
}

impl std::error::Error for CorpusError {}

impl From<std::io::Error> for CorpusError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}

/// Punctuation characters removed wherever they occur in the text.
const STRIP_CHARS: &[char] = &['.', ',', '!', '?', ';', ':', '"', '(', ')', '[', ']'];

/// Word-level tokenizer: lowercase, strip the ASCII punctuation set
/// `.,!?;:"()[]`, split on whitespace, trim leading/trailing apostrophes
/// (internal apostrophes kept), drop empty fragments.
pub fn tokenize(text: &str) -> TokenSeq {
    let lowered = text.to_lowercase();
    let cleaned: String = lowered.chars().filter(|c| !STRIP_CHARS.contains(c)).collect();
    let tokens = cleaned
        .split_whitespace()
        .map(|t| t.trim_matches('\''))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect();
    TokenSeq(tokens)
}

#[derive(Deserialize)]
struct ExampleRecord {
    id: Option<String>,
    premise: String,
    hypothesis: String,
    label: String,
}

#[derive(Serialize)]
struct ExampleRecordOut<'a> {
    id: &'a str,
    premise: &'a str,
    hypothesis: &'a str,
    label: &'a str,
}

/// Parse a line-delimited examples stream.
///
/// Records labeled "-" (the SNLI unlabeled convention) are skipped and
/// counted in the report. Missing ids are assigned the zero-based line
/// index. Line numbers in errors are one-based.
pub fn load_examples<R: BufRead>(source: R) -> Result<(Vec<Example>, SkipReport), CorpusError> {
    let mut examples = Vec::new();
    let mut report = SkipReport::default();
    let mut seen: HashSet<String> = HashSet::new();

    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let record: ExampleRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                line: lineno,
                message: e.to_string(),
            })?;
        if record.label == "-" {
            report.skipped_unlabeled += 1;
            continue;
        }
        let gold = Label::parse(&record.label).ok_or_else(|| CorpusError::UnknownLabel {
            line: lineno,
            value: record.label.clone(),
        })?;
        if record.premise.trim().is_empty() {
            return Err(CorpusError::EmptyField { line: lineno, field: "premise" });
        }
        if record.hypothesis.trim().is_empty() {
            return Err(CorpusError::EmptyField { line: lineno, field: "hypothesis" });
        }
        let id = record.id.unwrap_or_else(|| idx.to_string());
        if !seen.insert(id.clone()) {
            return Err(CorpusError::DuplicateId { id });
        }
        examples.push(Example {
            id,
            premise: record.premise,
            hypothesis: record.hypothesis,
            gold,
        });
        report.loaded += 1;
    }
    Ok((examples, report))
}

/// Serialize examples in the same line-delimited format `load_examples`
/// reads, one JSON object per line.
pub fn write_examples<W: std::io::Write>(
    mut out: W,
    examples: &[Example],
) -> Result<(), CorpusError> {
    for ex in examples {
        let record = ExampleRecordOut {
            id: &ex.id,
            premise: &ex.premise,
            hypothesis: &ex.hypothesis,
            label: ex.gold.as_str(),
        };
        serde_json::to_writer(&mut out, &record).map_err(|e| CorpusError::Malformed {
            line: 0,
            message: e.to_string(),
        })?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct PredictionRecord {
    id: String,
    probs: Vec<f64>,
}

#[derive(Serialize)]
struct PredictionRecordOut<'a> {
    id: &'a str,
    probs: [f64; 3],
}

/// Tolerance on the probability-vector sum.
pub const PROB_SUM_TOLERANCE: f64 = 1e-6;

/// Parse a line-delimited predictions stream, deriving the predicted label
/// as the argmax of `probs` and validating the probability invariants.
pub fn load_predictions<R: BufRead>(source: R) -> Result<Vec<Prediction>, CorpusError> {
    let mut predictions = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();

    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let record: PredictionRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                line: lineno,
                message: e.to_string(),
            })?;
        if record.probs.len() != 3 {
            return Err(CorpusError::BadProbs {
                line: lineno,
                message: format!("expected 3 entries, got {}", record.probs.len()),
            });
        }
        let probs = [record.probs[0], record.probs[1], record.probs[2]];
        for (k, p) in probs.iter().enumerate() {
            if !p.is_finite() || *p < 0.0 || *p > 1.0 {
                return Err(CorpusError::BadProbs {
                    line: lineno,
                    message: format!("entry {k} = {p} outside [0,1]"),
                });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(CorpusError::BadProbs {
                line: lineno,
                message: format!("entries sum to {sum}, expected 1"),
            });
        }
        if !seen.insert(record.id.clone()) {
            return Err(CorpusError::DuplicateId { id: record.id });
        }
        predictions.push(Prediction {
            predicted: argmax_label(&probs),
            id: record.id,
            probs,
        });
    }
    Ok(predictions)
}

/// Serialize predictions in the format `load_predictions` reads. Floats are
/// written with enough digits to round-trip exactly.
pub fn write_predictions<W: std::io::Write>(
    mut out: W,
    predictions: &[Prediction],
) -> Result<(), CorpusError> {
    for p in predictions {
        let record = PredictionRecordOut { id: &p.id, probs: p.probs };
        serde_json::to_writer(&mut out, &record).map_err(|e| CorpusError::Malformed {
            line: 0,
            message: e.to_string(),
        })?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Join predictions onto examples by id. Output order follows the example
/// list. Every example must have exactly one prediction and every
/// prediction must refer to a known example.
pub fn align(
    examples: &[Example],
    predictions: &[Prediction],
) -> Result<Vec<(Example, Prediction)>, CorpusError> {
    let mut by_id: HashMap<&str, &Prediction> = HashMap::with_capacity(predictions.len());
    for p in predictions {
        if by_id.insert(p.id.as_str(), p).is_some() {
            return Err(CorpusError::DuplicateId { id: p.id.clone() });
        }
    }
    let example_ids: HashSet<&str> = examples.iter().map(|e| e.id.as_str()).collect();
    if example_ids.len() != examples.len() {
        let mut seen = HashSet::new();
        for e in examples {
            if !seen.insert(e.id.as_str()) {
                return Err(CorpusError::DuplicateId { id: e.id.clone() });
            }
        }
    }
    for p in predictions {
        if !example_ids.contains(p.id.as_str()) {
            return Err(CorpusError::UnknownPredictionId { id: p.id.clone() });
        }
    }
    let missing: Vec<String> = examples
        .iter()
        .filter(|e| !by_id.contains_key(e.id.as_str()))
        .map(|e| e.id.clone())
        .collect();
    if !missing.is_empty() {
        let total = missing.len();
        return Err(CorpusError::MissingPredictions {
            ids: missing.into_iter().take(10).collect(),
            total,
        });
    }
    Ok(examples
        .iter()
        .map(|e| (e.clone(), by_id[e.id.as_str()].clone()))
        .collect())
}
