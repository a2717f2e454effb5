//! Bias-sliced evaluation of aligned predictions: confusion matrix,
//! per-class and macro statistics, error-transition distribution,
//! per-artifact-flag accuracies, length-bin accuracy, and a mean-confidence
//! profile over hypothesis-length bins.
//!
//! All functions are pure over immutable inputs and independent of input
//! order; reports serialize to a single JSON document with stable field
//! order plus plot-ready CSV fragments.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::artifacts::{ArtifactProfile, ARTIFACT_AXES};
use crate::corpus::{Example, Label, Prediction};

/// 3x3 counts; rows are gold labels, columns predicted labels, both in
/// label-code order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..3).map(|k| self.counts[k][k]).sum()
    }

    pub fn row_sum(&self, gold: usize) -> u64 {
        self.counts[gold].iter().sum()
    }

    pub fn col_sum(&self, pred: usize) -> u64 {
        (0..3).map(|g| self.counts[g][pred]).sum()
    }
}

/// Precision/recall/F1 for one class. Zero-denominator ratios are reported
/// as 0 with the matching `*_undefined` flag set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassStat {
    pub label: &'static str,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

/// Per-class statistics plus unweighted macro averages and accuracy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassStats {
    pub accuracy: f64,
    pub per_class: [ClassStat; 3],
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

/// One ordered gold-to-predicted error category.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transition {
    pub gold: &'static str,
    pub predicted: &'static str,
    pub count: u64,
    /// Percentage of total errors; absent when there are no errors.
    pub pct_of_errors: Option<f64>,
}

/// Accuracy over one sub-population, with its size. `accuracy` is absent
/// when the population is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SliceAccuracy {
    pub population: u64,
    pub correct: u64,
    pub accuracy: Option<f64>,
}

/// Mean confidence over one sub-population; absent when empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SliceConfidence {
    pub population: u64,
    pub mean_confidence: Option<f64>,
}

/// Inclusive |length_diff| bins for accuracy slicing.
pub const LENGTH_BINS: [(&str, i64, i64); 4] =
    [("0-5", 0, 5), ("6-10", 6, 10), ("11-15", 11, 15), ("16+", 16, i64::MAX)];

/// Hypothesis-length bins for the confidence profile.
pub const CONFIDENCE_BINS: [(&str, usize, usize); 3] =
    [("short", 0, 5), ("medium", 6, 12), ("long", 13, usize::MAX)];

/// The full evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub total_pairs: u64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub class_stats: ClassStats,
    pub transitions: Vec<Transition>,
    pub total_errors: u64,
    /// Keyed by artifact axis name in `ARTIFACT_AXES` order.
    pub bias_accuracy: Vec<(String, SliceAccuracy)>,
    /// Keyed by |length_diff| bin label.
    pub length_bin_accuracy: Vec<(String, SliceAccuracy)>,
    /// Keyed by hypothesis-length bin label.
    pub confidence_profile: Vec<(String, SliceConfidence)>,
}

#[derive(Debug)]
pub enum MetricsError {
    EmptyInput,
    MissingProfile { id: String },
    DuplicateProfile { id: String },
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyInput => write!(f, "cannot evaluate an empty pair list"),
            Self::MissingProfile { id } => {
                write!(f, "no artifact profile for example id '{id}'")
            }
            Self::DuplicateProfile { id } => {
                write!(f, "duplicate artifact profile for id '{id}'")
            }
        }
    }
}

impl std::error::Error for MetricsError {}

/// Count gold-vs-predicted outcomes. Errors on empty input.
pub fn confusion(pairs: &[(Example, Prediction)]) -> Result<ConfusionMatrix, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut counts = [[0u64; 3]; 3];
    for (example, prediction) in pairs {
        counts[example.gold.code()][prediction.predicted.code()] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

fn ratio(numerator: u64, denominator: u64) -> (f64, bool) {
    if denominator == 0 {
        (0.0, true)
    } else {
        (numerator as f64 / denominator as f64, false)
    }
}

/// Per-class precision/recall/F1, macro averages, and accuracy from a
/// confusion matrix.
pub fn class_stats(m: &ConfusionMatrix) -> ClassStats {
    let mut per_class = [ClassStat {
        label: "",
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
        precision_undefined: false,
        recall_undefined: false,
        f1_undefined: false,
    }; 3];
    for label in Label::ALL {
        let c = label.code();
        let tp = m.counts[c][c];
        let (precision, p_undef) = ratio(tp, m.col_sum(c));
        let (recall, r_undef) = ratio(tp, m.row_sum(c));
        let (f1, f1_undef) = if precision + recall == 0.0 {
            (0.0, true)
        } else {
            (2.0 * precision * recall / (precision + recall), false)
        };
        per_class[c] = ClassStat {
            label: label.as_str(),
            precision,
            recall,
            f1,
            precision_undefined: p_undef,
            recall_undefined: r_undef,
            f1_undefined: f1_undef,
        };
    }
    let total = m.total();
    let accuracy = if total == 0 { 0.0 } else { m.trace() as f64 / total as f64 };
    ClassStats {
        accuracy,
        per_class,
        macro_precision: per_class.iter().map(|s| s.precision).sum::<f64>() / 3.0,
        macro_recall: per_class.iter().map(|s| s.recall).sum::<f64>() / 3.0,
        macro_f1: per_class.iter().map(|s| s.f1).sum::<f64>() / 3.0,
    }
}

/// The six ordered gold-to-predicted misclassification counts with
/// percentages of total errors (omitted when there are no errors).
/// Transitions are listed in (gold code, predicted code) order.
pub fn error_transitions(pairs: &[(Example, Prediction)]) -> Vec<Transition> {
    let mut counts: HashMap<(usize, usize), u64> = HashMap::new();
    for (example, prediction) in pairs {
        if example.gold != prediction.predicted {
            *counts
                .entry((example.gold.code(), prediction.predicted.code()))
                .or_insert(0) += 1;
        }
    }
    let total_errors: u64 = counts.values().sum();
    let mut transitions = Vec::with_capacity(6);
    for gold in Label::ALL {
        for predicted in Label::ALL {
            if gold == predicted {
                continue;
            }
            let count = counts.get(&(gold.code(), predicted.code())).copied().unwrap_or(0);
            let pct_of_errors = if total_errors == 0 {
                None
            } else {
                Some(100.0 * count as f64 / total_errors as f64)
            };
            transitions.push(Transition {
                gold: gold.as_str(),
                predicted: predicted.as_str(),
                count,
                pct_of_errors,
            });
        }
    }
    transitions
}

fn profile_index<'a>(
    pairs: &[(Example, Prediction)],
    profiles: &'a [ArtifactProfile],
) -> Result<HashMap<&'a str, &'a ArtifactProfile>, MetricsError> {
    let mut index: HashMap<&str, &ArtifactProfile> = HashMap::with_capacity(profiles.len());
    for p in profiles {
        if index.insert(p.id.as_str(), p).is_some() {
            return Err(MetricsError::DuplicateProfile { id: p.id.clone() });
        }
    }
    for (example, _) in pairs {
        if !index.contains_key(example.id.as_str()) {
            return Err(MetricsError::MissingProfile { id: example.id.clone() });
        }
    }
    Ok(index)
}

fn slice_accuracy(population: u64, correct: u64) -> SliceAccuracy {
    SliceAccuracy {
        population,
        correct,
        accuracy: if population == 0 { None } else { Some(correct as f64 / population as f64) },
    }
}

/// Accuracy over the sub-population carrying each artifact flag. A flag
/// with zero population reports an absent accuracy, not 0.
pub fn bias_sliced_accuracy(
    pairs: &[(Example, Prediction)],
    profiles: &[ArtifactProfile],
) -> Result<Vec<(String, SliceAccuracy)>, MetricsError> {
    let index = profile_index(pairs, profiles)?;
    let mut population = [0u64; 4];
    let mut correct = [0u64; 4];
    for (example, prediction) in pairs {
        let flags = index[example.id.as_str()].flags();
        let hit = example.gold == prediction.predicted;
        for k in 0..4 {
            if flags[k] {
                population[k] += 1;
                correct[k] += u64::from(hit);
            }
        }
    }
    Ok(ARTIFACT_AXES
        .iter()
        .enumerate()
        .map(|(k, axis)| (axis.to_string(), slice_accuracy(population[k], correct[k])))
        .collect())
}

/// Accuracy per |length_diff| bin (inclusive on both stated endpoints;
/// 16+ unbounded above).
pub fn length_bin_accuracy(
    pairs: &[(Example, Prediction)],
    profiles: &[ArtifactProfile],
) -> Result<Vec<(String, SliceAccuracy)>, MetricsError> {
    let index = profile_index(pairs, profiles)?;
    let mut population = [0u64; 4];
    let mut correct = [0u64; 4];
    for (example, prediction) in pairs {
        let diff = index[example.id.as_str()].length_diff.abs();
        let bin = LENGTH_BINS
            .iter()
            .position(|(_, lo, hi)| diff >= *lo && diff <= *hi)
            .expect("bins cover all non-negative differences");
        population[bin] += 1;
        correct[bin] += u64::from(example.gold == prediction.predicted);
    }
    Ok(LENGTH_BINS
        .iter()
        .enumerate()
        .map(|(k, (name, _, _))| (name.to_string(), slice_accuracy(population[k], correct[k])))
        .collect())
}

/// Mean prediction confidence (max probability) per hypothesis-length bin:
/// short <= 5, medium 6-12, long > 12. Empty bins are reported absent.
/// Confidences are summed in id-sorted order so the means are independent
/// of input order down to the last bit.
pub fn confidence_profile(
    pairs: &[(Example, Prediction)],
    profiles: &[ArtifactProfile],
) -> Result<Vec<(String, SliceConfidence)>, MetricsError> {
    let index = profile_index(pairs, profiles)?;
    let mut by_id: Vec<&(Example, Prediction)> = pairs.iter().collect();
    by_id.sort_by(|(a, _), (b, _)| a.id.cmp(&b.id));
    let mut population = [0u64; 3];
    let mut sums = [0.0f64; 3];
    for (example, prediction) in by_id {
        let hyp_len = index[example.id.as_str()].hyp_len;
        let bin = CONFIDENCE_BINS
            .iter()
            .position(|(_, lo, hi)| hyp_len >= *lo && hyp_len <= *hi)
            .expect("bins cover all lengths");
        population[bin] += 1;
        sums[bin] += prediction.confidence();
    }
    Ok(CONFIDENCE_BINS
        .iter()
        .enumerate()
        .map(|(k, (name, _, _))| {
            (
                name.to_string(),
                SliceConfidence {
                    population: population[k],
                    mean_confidence: if population[k] == 0 {
                        None
                    } else {
                        Some(sums[k] / population[k] as f64)
                    },
                },
            )
        })
        .collect())
}

/// Assemble the full report from aligned pairs and matching profiles.
pub fn evaluate(
    pairs: &[(Example, Prediction)],
    profiles: &[ArtifactProfile],
) -> Result<EvalReport, MetricsError> {
    let confusion = confusion(pairs)?;
    let stats = class_stats(&confusion);
    let transitions = error_transitions(pairs);
    let total_errors: u64 = transitions.iter().map(|t| t.count).sum();
    Ok(EvalReport {
        total_pairs: confusion.total(),
        accuracy: stats.accuracy,
        class_stats: stats,
        confusion,
        transitions,
        total_errors,
        bias_accuracy: bias_sliced_accuracy(pairs, profiles)?,
        length_bin_accuracy: length_bin_accuracy(pairs, profiles)?,
        confidence_profile: confidence_profile(pairs, profiles)?,
    })
}

impl EvalReport {
    /// Single JSON document with stable field order.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    /// confusion.csv: gold label rows, predicted label columns.
    pub fn write_confusion_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "gold,entailment,neutral,contradiction")?;
        for gold in Label::ALL {
            let row = self.confusion.counts[gold.code()];
            writeln!(out, "{},{},{},{}", gold, row[0], row[1], row[2])?;
        }
        Ok(())
    }

    /// transitions.csv: the six error transitions with percentages.
    pub fn write_transitions_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "gold,predicted,count,pct_of_errors")?;
        for t in &self.transitions {
            match t.pct_of_errors {
                Some(pct) => {
                    writeln!(out, "{},{},{},{:.4}", t.gold, t.predicted, t.count, pct)?
                }
                None => writeln!(out, "{},{},{},", t.gold, t.predicted, t.count)?,
            }
        }
        Ok(())
    }

    /// bias_slices.csv: per-artifact-flag accuracy.
    pub fn write_bias_slices_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "artifact,population,correct,accuracy")?;
        for (axis, slice) in &self.bias_accuracy {
            match slice.accuracy {
                Some(acc) => writeln!(
                    out,
                    "{},{},{},{:.4}",
                    axis, slice.population, slice.correct, acc
                )?,
                None => writeln!(out, "{},{},{},", axis, slice.population, slice.correct)?,
            }
        }
        Ok(())
    }

    /// bins.csv: length-difference accuracy bins and hypothesis-length
    /// confidence bins.
    pub fn write_bins_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "kind,bin,population,value")?;
        for (bin, slice) in &self.length_bin_accuracy {
            match slice.accuracy {
                Some(acc) => {
                    writeln!(out, "length_accuracy,{},{},{:.4}", bin, slice.population, acc)?
                }
                None => writeln!(out, "length_accuracy,{},{},", bin, slice.population)?,
            }
        }
        for (bin, slice) in &self.confidence_profile {
            match slice.mean_confidence {
                Some(mean) => {
                    writeln!(out, "confidence_mean,{},{},{:.4}", bin, slice.population, mean)?
                }
                None => writeln!(out, "confidence_mean,{},{},", bin, slice.population)?,
            }
        }
        Ok(())
    }
}
