//! Per-example artifact features, threshold flags, prevalence, and
//! co-occurrence statistics.
//!
//! Four artifact categories are tracked: length difference, lexical
//! overlap, subset relationship (the degenerate overlap = 1 case), and
//! negation cues. Overlap is hypothesis-token coverage over unique tokens,
//! the definition consistent with both worked reference values (0.90 for
//! partial overlap, 1.00 when a recurring token is absorbed by the
//! premise).

use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use crate::corpus::{tokenize, Example, TokenSeq};

/// Artifact axes in fixed order, used by the co-occurrence matrix and all
/// per-flag reports.
pub const ARTIFACT_AXES: [&str; 4] = ["length", "overlap", "subset", "negation"];

/// Flag thresholds. Defaults: length difference 5 tokens, overlap 0.8.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub length_diff_min: u32,
    pub overlap_min: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { length_diff_min: 5, overlap_min: 0.8 }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), ArtifactsError> {
        if !(0.0..=1.0).contains(&self.overlap_min) || !self.overlap_min.is_finite() {
            return Err(ArtifactsError::BadThreshold(format!(
                "overlap_min must be in [0,1], got {}",
                self.overlap_min
            )));
        }
        Ok(())
    }
}

/// Closed-class negation cue tokens, matched against hypothesis tokens
/// (and optionally premise tokens when `include_premise` is set).
#[derive(Debug, Clone)]
pub struct NegationLexicon {
    cues: HashSet<String>,
    pub include_premise: bool,
}

const DEFAULT_CUES: [&str; 19] = [
    "not", "no", "never", "nobody", "nothing", "none", "neither", "nor", "cannot", "can't",
    "don't", "doesn't", "didn't", "isn't", "aren't", "wasn't", "weren't", "won't", "n't",
];

impl Default for NegationLexicon {
    fn default() -> Self {
        Self {
            cues: DEFAULT_CUES.iter().map(|s| s.to_string()).collect(),
            include_premise: false,
        }
    }
}

impl NegationLexicon {
    /// Build a lexicon from custom cue tokens; entries are lowercased.
    pub fn from_cues<I: IntoIterator<Item = String>>(cues: I) -> Result<Self, ArtifactsError> {
        let cues: HashSet<String> = cues.into_iter().map(|c| c.to_lowercase()).collect();
        if cues.is_empty() {
            return Err(ArtifactsError::EmptyLexicon);
        }
        Ok(Self { cues, include_premise: false })
    }

    pub fn contains(&self, token: &str) -> bool {
        self.cues.contains(token)
    }

    pub fn cues(&self) -> impl Iterator<Item = &str> {
        self.cues.iter().map(|s| s.as_str())
    }
}

/// Per-example artifact measurements and threshold flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactProfile {
    pub id: String,
    pub prem_len: usize,
    pub hyp_len: usize,
    /// prem_len - hyp_len, signed.
    pub length_diff: i64,
    pub overlap: f64,
    pub is_subset: bool,
    pub has_negation: bool,
    pub flag_length: bool,
    pub flag_overlap: bool,
    pub flag_subset: bool,
    pub flag_negation: bool,
}

impl ArtifactProfile {
    /// Flags in `ARTIFACT_AXES` order.
    pub fn flags(&self) -> [bool; 4] {
        [self.flag_length, self.flag_overlap, self.flag_subset, self.flag_negation]
    }

    pub fn any_flag(&self) -> bool {
        self.flags().iter().any(|f| *f)
    }
}

/// 4x4 count matrix over the artifact axes plus the example total.
/// Entry (i, j) counts examples carrying both flag i and flag j; the
/// diagonal holds single-flag counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CooccurrenceMatrix {
    pub counts: [[u64; 4]; 4],
    pub total_examples: u64,
}

/// Per-flag counts and the fraction of examples with at least one flag.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrevalenceReport {
    pub total_examples: usize,
    pub flag_counts: FlagCounts,
    pub any_artifact_count: usize,
    pub any_artifact_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FlagCounts {
    pub length: usize,
    pub overlap: usize,
    pub subset: usize,
    pub negation: usize,
}

#[derive(Debug)]
pub enum ArtifactsError {
    EmptyInput,
    EmptyLexicon,
    BadThreshold(String),
}

impl fmt::Display for ArtifactsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyInput => write!(f, "cannot aggregate over an empty profile list"),
            Self::EmptyLexicon => write!(f, "negation lexicon must be non-empty"),
            Self::BadThreshold(msg) => write!(f, "invalid threshold: {msg}"),
        }
    }
}

impl std::error::Error for ArtifactsError {}

/// Fraction of unique hypothesis tokens that also appear in the premise.
/// Returns 0 for an empty hypothesis so degenerate inputs do not poison
/// aggregates.
pub fn overlap_score(prem: &TokenSeq, hyp: &TokenSeq) -> f64 {
    let hyp_unique = hyp.unique();
    if hyp_unique.is_empty() {
        return 0.0;
    }
    let prem_unique = prem.unique();
    let inter = hyp_unique.iter().filter(|t| prem_unique.contains(**t)).count();
    inter as f64 / hyp_unique.len() as f64
}

/// Signed token-count difference: premise length minus hypothesis length.
pub fn length_difference(prem: &TokenSeq, hyp: &TokenSeq) -> i64 {
    prem.len() as i64 - hyp.len() as i64
}

/// True iff any hypothesis token is a negation cue.
pub fn has_negation(hyp: &TokenSeq, lexicon: &NegationLexicon) -> bool {
    hyp.iter().any(|t| lexicon.contains(t))
}

/// Compute the full artifact profile for one example.
pub fn profile(
    example: &Example,
    thresholds: &Thresholds,
    lexicon: &NegationLexicon,
) -> ArtifactProfile {
    let prem = tokenize(&example.premise);
    let hyp = tokenize(&example.hypothesis);

    let hyp_unique = hyp.unique();
    let prem_unique = prem.unique();
    let inter = hyp_unique.iter().filter(|t| prem_unique.contains(**t)).count();
    let overlap = if hyp_unique.is_empty() { 0.0 } else { inter as f64 / hyp_unique.len() as f64 };
    let is_subset = !hyp_unique.is_empty() && inter == hyp_unique.len();

    let length_diff = prem.len() as i64 - hyp.len() as i64;
    let negated = has_negation(&hyp, lexicon)
        || (lexicon.include_premise && prem.iter().any(|t| lexicon.contains(t)));

    ArtifactProfile {
        id: example.id.clone(),
        prem_len: prem.len(),
        hyp_len: hyp.len(),
        length_diff,
        overlap,
        is_subset,
        has_negation: negated,
        flag_length: length_diff.unsigned_abs() >= u64::from(thresholds.length_diff_min),
        flag_overlap: overlap >= thresholds.overlap_min,
        flag_subset: is_subset,
        flag_negation: negated,
    }
}

/// Profile every example in order.
pub fn profile_all(
    examples: &[Example],
    thresholds: &Thresholds,
    lexicon: &NegationLexicon,
) -> Vec<ArtifactProfile> {
    examples.iter().map(|e| profile(e, thresholds, lexicon)).collect()
}

/// Per-flag counts plus the fraction of examples carrying at least one
/// artifact flag. Errors on an empty input list.
pub fn prevalence(profiles: &[ArtifactProfile]) -> Result<PrevalenceReport, ArtifactsError> {
    if profiles.is_empty() {
        return Err(ArtifactsError::EmptyInput);
    }
    let mut counts = [0usize; 4];
    let mut any = 0usize;
    for p in profiles {
        let flags = p.flags();
        for (k, set) in flags.iter().enumerate() {
            if *set {
                counts[k] += 1;
            }
        }
        if p.any_flag() {
            any += 1;
        }
    }
    Ok(PrevalenceReport {
        total_examples: profiles.len(),
        flag_counts: FlagCounts {
            length: counts[0],
            overlap: counts[1],
            subset: counts[2],
            negation: counts[3],
        },
        any_artifact_count: any,
        any_artifact_fraction: any as f64 / profiles.len() as f64,
    })
}

/// Count pairwise flag co-occurrence. Symmetric by construction; the
/// diagonal equals the per-flag counts.
pub fn cooccurrence(profiles: &[ArtifactProfile]) -> CooccurrenceMatrix {
    let mut counts = [[0u64; 4]; 4];
    for p in profiles {
        let flags = p.flags();
        for i in 0..4 {
            if !flags[i] {
                continue;
            }
            for j in 0..4 {
                if flags[j] {
                    counts[i][j] += 1;
                }
            }
        }
    }
    CooccurrenceMatrix { counts, total_examples: profiles.len() as u64 }
}

/// CSV export of profiles: booleans as 0/1, overlap with 4 decimal places.
pub fn write_profiles_csv<W: std::io::Write>(
    mut out: W,
    profiles: &[ArtifactProfile],
) -> std::io::Result<()> {
    writeln!(
        out,
        "id,prem_len,hyp_len,length_diff,overlap,is_subset,has_negation,\
         flag_length,flag_overlap,flag_subset,flag_negation"
    )?;
    for p in profiles {
        writeln!(
            out,
            "{},{},{},{},{:.4},{},{},{},{},{},{}",
            p.id,
            p.prem_len,
            p.hyp_len,
            p.length_diff,
            p.overlap,
            u8::from(p.is_subset),
            u8::from(p.has_negation),
            u8::from(p.flag_length),
            u8::from(p.flag_overlap),
            u8::from(p.flag_subset),
            u8::from(p.flag_negation),
        )?;
    }
    Ok(())
}

/// CSV export of the co-occurrence count matrix, one row per artifact axis.
pub fn write_cooccurrence_csv<W: std::io::Write>(
    mut out: W,
    matrix: &CooccurrenceMatrix,
) -> std::io::Result<()> {
    writeln!(out, "artifact,{}", ARTIFACT_AXES.join(","))?;
    for (i, axis) in ARTIFACT_AXES.iter().enumerate() {
        let row: Vec<String> = matrix.counts[i].iter().map(|c| c.to_string()).collect();
        writeln!(out, "{},{}", axis, row.join(","))?;
    }
    Ok(())
}
