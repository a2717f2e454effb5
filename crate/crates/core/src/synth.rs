//! Synthetic NLI corpora with controllable artifact-label correlation.
//!
//! Every example gets a uniformly sampled gold label and honest,
//! label-consistent content words (hypernyms for entailment, an
//! incompatible-state marker for contradiction, an unverifiable attribute
//! for neutral), so the true label is recoverable without artifacts. An
//! artifact cue (short hypothesis, high-overlap hypothesis, or a negation
//! token) is then overlaid with a probability that depends on the gold
//! label, which fixes `P(gold = indicated label | flag set)` at the
//! configured correlation in the train and aligned splits and inverts it
//! in the anti split. Cue templates are arithmetic-checked against the
//! artifact detectors: each family trips exactly its own flag.

use std::fmt;

use serde::Serialize;

use crate::artifacts::{profile, NegationLexicon, Thresholds};
use crate::corpus::{Example, Label};
use crate::rng::Xoshiro256StarStar;

/// Relative weights for the three cue generators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArtifactMix {
    pub length: f64,
    pub overlap: f64,
    pub negation: f64,
}

impl Default for ArtifactMix {
    fn default() -> Self {
        Self { length: 1.0, overlap: 1.0, negation: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SynthConfig {
    pub n_train: usize,
    pub n_test: usize,
    /// Probability in [1/3, 1] that an artifact-cued training example's
    /// gold label is the label the artifact indicates.
    pub bias_strength: f64,
    pub artifact_mix: ArtifactMix,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_train: 8000,
            n_test: 2000,
            bias_strength: 0.9,
            artifact_mix: ArtifactMix::default(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_train == 0 || self.n_test == 0 {
            return Err(SynthError::BadConfig("split sizes must be positive".into()));
        }
        if !(self.bias_strength >= 1.0 / 3.0 && self.bias_strength <= 1.0) {
            return Err(SynthError::BadBias(self.bias_strength));
        }
        let m = &self.artifact_mix;
        if m.length < 0.0 || m.overlap < 0.0 || m.negation < 0.0 {
            return Err(SynthError::BadConfig("artifact mix weights must be non-negative".into()));
        }
        if m.length + m.overlap + m.negation <= 0.0 {
            return Err(SynthError::BadConfig("artifact mix weights must sum above zero".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub train: Vec<Example>,
    pub test_aligned: Vec<Example>,
    pub test_anti: Vec<Example>,
}

#[derive(Debug)]
pub enum SynthError {
    BadBias(f64),
    BadConfig(String),
}

impl fmt::Display for SynthError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BadBias(b) => {
                write!(f, "bias_strength must be in [1/3, 1], got {b}")
            }
            Self::BadConfig(msg) => write!(f, "invalid synth config: {msg}"),
        }
    }
}

impl std::error::Error for SynthError {}

// phrase bank: subjects with their entailment hypernyms
const SUBJECTS: [(&str, &str); 10] = [
    ("man", "person"),
    ("woman", "person"),
    ("boy", "person"),
    ("girl", "person"),
    ("runner", "person"),
    ("worker", "person"),
    ("farmer", "person"),
    ("artist", "person"),
    ("teacher", "person"),
    ("dog", "animal"),
];

const VERBS: [&str; 10] = [
    "walking", "running", "sitting", "standing", "playing", "eating", "resting", "dancing",
    "working", "reading",
];

const PLACES: [&str; 10] = [
    "park", "street", "beach", "garden", "field", "market", "station", "plaza", "trail", "yard",
];

const COLORS: [&str; 8] = ["red", "blue", "green", "black", "white", "yellow", "purple", "orange"];

const GARMENTS: [&str; 6] = ["shirt", "jacket", "hat", "scarf", "sweater", "coat"];

/// Unverifiable attributes: the neutral-label content signal.
const EXTRAS: [&str; 8] =
    ["famous", "married", "tired", "hungry", "wealthy", "talented", "friendly", "nervous"];

/// Four-token premise tails; every premise carries one, so the pad
/// vocabulary is uncorrelated with labels and artifact cues.
const PREMISE_PADS: [&str; 5] = [
    "on a sunny day",
    "in the early morning",
    "near the old bridge",
    "with a small bag",
    "under a clear sky",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CueFamily {
    Length,
    Overlap,
    Negation,
}

impl CueFamily {
    /// The label the artifact nudges models toward: short and
    /// high-overlap hypotheses read as entailment, negation cues as
    /// contradiction.
    fn indicated(self) -> Label {
        match self {
            CueFamily::Length | CueFamily::Overlap => Label::Entailment,
            CueFamily::Negation => Label::Contradiction,
        }
    }
}

struct Slots {
    subject: &'static str,
    hypernym: &'static str,
    verb: &'static str,
    place: &'static str,
    other_place: &'static str,
    color: &'static str,
    garment: &'static str,
    extra: &'static str,
    pad: &'static str,
}

impl Slots {
    fn sample(rng: &mut Xoshiro256StarStar) -> Self {
        let (subject, hypernym) = SUBJECTS[rng.below(SUBJECTS.len())];
        let place_idx = rng.below(PLACES.len());
        let other_place = PLACES[(place_idx + 1 + rng.below(PLACES.len() - 1)) % PLACES.len()];
        Self {
            subject,
            hypernym,
            verb: VERBS[rng.below(VERBS.len())],
            place: PLACES[place_idx],
            other_place,
            color: COLORS[rng.below(COLORS.len())],
            garment: GARMENTS[rng.below(GARMENTS.len())],
            extra: EXTRAS[rng.below(EXTRAS.len())],
            pad: PREMISE_PADS[rng.below(PREMISE_PADS.len())],
        }
    }

    /// 15-token premise: 11-token body plus a 4-token tail.
    fn premise(&self) -> String {
        format!(
            "{} {} in {} {} {} is {} at the {} {}.",
            capitalize(article(self.subject)),
            self.subject,
            article(self.color),
            self.color,
            self.garment,
            self.verb,
            self.place,
            self.pad
        )
    }

    /// Cue-free hypothesis, 11-12 tokens, overlap below 0.8.
    fn plain_hypothesis(&self, gold: Label) -> String {
        match gold {
            Label::Entailment => format!(
                "{} {} is {} outdoors at the {} during the day.",
                capitalize(article(self.hypernym)),
                self.hypernym,
                self.verb,
                self.place
            ),
            Label::Contradiction => format!(
                "The {} is {} indoors inside the house during the day.",
                self.subject, self.verb
            ),
            Label::Neutral => format!(
                "The {} in the {} {} seems {} during the day.",
                self.subject, self.color, self.garment, self.extra
            ),
        }
    }

    /// At most 5 tokens, leaving a premise-hypothesis gap above the flag.
    fn short_hypothesis(&self, gold: Label) -> String {
        match gold {
            Label::Entailment => {
                format!("{} {} is {}.", capitalize(article(self.hypernym)), self.hypernym, self.verb)
            }
            Label::Contradiction => format!("The {} is indoors.", self.subject),
            Label::Neutral => format!("The {} is {}.", self.subject, self.extra),
        }
    }

    /// Unique-token overlap of at least 0.8; reuses the premise tail so
    /// the length gap stays under the flag.
    fn overlap_hypothesis(&self, gold: Label) -> String {
        match gold {
            Label::Entailment => format!(
                "{} {} in {} {} {} is {} {}.",
                capitalize(article(self.subject)),
                self.subject,
                article(self.color),
                self.color,
                self.garment,
                self.verb,
                self.pad
            ),
            Label::Contradiction => format!(
                "The {} in the {} {} is {} indoors inside {}.",
                self.subject, self.color, self.garment, self.verb, self.pad
            ),
            Label::Neutral => format!(
                "The {} in the {} {} is {} {}.",
                self.subject, self.color, self.garment, self.extra, self.pad
            ),
        }
    }

    /// Carries a negation cue; length and overlap stay below their flags.
    fn negation_hypothesis(&self, gold: Label) -> String {
        match gold {
            Label::Entailment => format!(
                "The {} is not at the {} right now during the day.",
                self.subject, self.other_place
            ),
            Label::Contradiction => format!(
                "The {} is not {} at the {} right now today.",
                self.subject, self.verb, self.place
            ),
            Label::Neutral => format!(
                "The {} is not {} at all during the long day.",
                self.subject, self.extra
            ),
        }
    }
}

fn article(word: &str) -> &'static str {
    match word.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

/// Fraction of the cue-probability budget actually spent. Scaling every
/// label's cue quota by the same rate leaves P(gold = indicated | flag)
/// untouched while keeping most of each label's hypotheses in the
/// cue-free shape, so artifact shapes stay the minority pattern within
/// every label.
const CUE_RATE: f64 = 0.25;

/// Share of a (family, gold) group that carries the cue, chosen so that
/// P(gold = indicated | cued) equals `correlation` under uniform labels.
fn cue_share(gold: Label, indicated: Label, correlation: f64) -> f64 {
    CUE_RATE
        * if gold == indicated {
            correlation
        } else {
            (1.0 - correlation) / 2.0
        }
}

fn generate_split(
    prefix: &str,
    n: usize,
    correlation: f64,
    mix: &ArtifactMix,
    rng: &mut Xoshiro256StarStar,
) -> Vec<Example> {
    // balanced gold labels, then shuffled
    let mut golds: Vec<Label> = (0..n).map(|i| Label::ALL[i % 3]).collect();
    rng.shuffle(&mut golds);

    let weights = [mix.length, mix.overlap, mix.negation];
    let families = [CueFamily::Length, CueFamily::Overlap, CueFamily::Negation];
    let assigned: Vec<CueFamily> = (0..n).map(|_| families[rng.weighted(&weights)]).collect();

    // Cue by exact quota within each (family, gold) group so the realized
    // artifact-label correlation matches the configured one up to
    // rounding, independent of sampling noise.
    let mut cued = vec![false; n];
    for family in families {
        for gold in Label::ALL {
            let mut group: Vec<usize> = (0..n)
                .filter(|&i| assigned[i] == family && golds[i] == gold)
                .collect();
            rng.shuffle(&mut group);
            let share = cue_share(gold, family.indicated(), correlation);
            let quota = (group.len() as f64 * share).round() as usize;
            for &i in group.iter().take(quota) {
                cued[i] = true;
            }
        }
    }

    golds
        .into_iter()
        .enumerate()
        .map(|(i, gold)| {
            let slots = Slots::sample(rng);
            let hypothesis = if cued[i] {
                match assigned[i] {
                    CueFamily::Length => slots.short_hypothesis(gold),
                    CueFamily::Overlap => slots.overlap_hypothesis(gold),
                    CueFamily::Negation => slots.negation_hypothesis(gold),
                }
            } else {
                slots.plain_hypothesis(gold)
            };
            let premise = slots.premise();
            Example { id: format!("{prefix}-{i:06}"), premise, hypothesis, gold }
        })
        .collect()
}

/// Generate train, aligned-test, and anti-test splits from independent
/// per-split seed streams.
pub fn generate(config: &SynthConfig) -> Result<SynthCorpus, SynthError> {
    config.validate()?;
    let stream = |k: u64| {
        Xoshiro256StarStar::seed_from_u64(
            config.seed ^ k.wrapping_mul(0x9e37_79b9_7f4a_7c15),
        )
    };
    let aligned_corr = config.bias_strength;
    // inverted correlation: the indicated label is gold only as often as
    // each non-indicated label was in the aligned split
    let anti_corr = (1.0 - config.bias_strength) / 2.0;
    Ok(SynthCorpus {
        train: generate_split("train", config.n_train, aligned_corr, &config.artifact_mix, &mut stream(1)),
        test_aligned: generate_split(
            "aligned",
            config.n_test,
            aligned_corr,
            &config.artifact_mix,
            &mut stream(2),
        ),
        test_anti: generate_split(
            "anti",
            config.n_test,
            anti_corr,
            &config.artifact_mix,
            &mut stream(3),
        ),
    })
}

/// Realized artifact-label correlation for one artifact in one split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArtifactCorrelation {
    /// Examples carrying the flag.
    pub population: usize,
    /// P(gold = indicated label | flag set); absent when no example
    /// carries the flag.
    pub correlation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitAudit {
    pub total: usize,
    pub label_counts: [usize; 3],
    pub length: ArtifactCorrelation,
    pub overlap: ArtifactCorrelation,
    pub subset: ArtifactCorrelation,
    pub negation: ArtifactCorrelation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub train: SplitAudit,
    pub test_aligned: SplitAudit,
    pub test_anti: SplitAudit,
}

/// Labels each artifact flag nudges toward, in artifact-axis order:
/// length, overlap, and subset read as entailment, negation as
/// contradiction.
pub const INDICATED_LABELS: [Label; 4] =
    [Label::Entailment, Label::Entailment, Label::Entailment, Label::Contradiction];

fn audit_split(examples: &[Example], thresholds: &Thresholds, lexicon: &NegationLexicon) -> SplitAudit {
    let mut label_counts = [0usize; 3];
    let mut population = [0usize; 4];
    let mut agree = [0usize; 4];
    for example in examples {
        label_counts[example.gold.code()] += 1;
        let p = profile(example, thresholds, lexicon);
        for (k, flag) in p.flags().iter().enumerate() {
            if *flag {
                population[k] += 1;
                agree[k] += usize::from(example.gold == INDICATED_LABELS[k]);
            }
        }
    }
    let corr = |k: usize| ArtifactCorrelation {
        population: population[k],
        correlation: if population[k] == 0 {
            None
        } else {
            Some(agree[k] as f64 / population[k] as f64)
        },
    };
    SplitAudit {
        total: examples.len(),
        label_counts,
        length: corr(0),
        overlap: corr(1),
        subset: corr(2),
        negation: corr(3),
    }
}

/// Run the artifact profiler over every split and report realized
/// artifact-label correlations.
pub fn audit(
    corpus: &SynthCorpus,
    thresholds: &Thresholds,
    lexicon: &NegationLexicon,
) -> AuditReport {
    AuditReport {
        train: audit_split(&corpus.train, thresholds, lexicon),
        test_aligned: audit_split(&corpus.test_aligned, thresholds, lexicon),
        test_anti: audit_split(&corpus.test_anti, thresholds, lexicon),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::artifacts::profile_all;

    fn defaults() -> (Thresholds, NegationLexicon) {
        (Thresholds::default(), NegationLexicon::default())
    }

    #[test]
    fn deterministic_per_seed() {
        let config = SynthConfig { n_train: 200, n_test: 50, ..SynthConfig::default() };
        let a = generate(&config).unwrap();
        let b = generate(&config).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test_anti, b.test_anti);
        let other = generate(&SynthConfig { seed: 1, ..config }).unwrap();
        assert_ne!(a.train, other.train);
    }

    #[test]
    fn splits_disjoint_by_id_and_balanced() {
        let config = SynthConfig { n_train: 300, n_test: 150, ..SynthConfig::default() };
        let corpus = generate(&config).unwrap();
        let mut ids: Vec<&str> = corpus
            .train
            .iter()
            .chain(&corpus.test_aligned)
            .chain(&corpus.test_anti)
            .map(|e| e.id.as_str())
            .collect();
        let before = ids.len();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), before);

        for split in [&corpus.train, &corpus.test_aligned, &corpus.test_anti] {
            let mut counts = [0usize; 3];
            for e in split.iter() {
                counts[e.gold.code()] += 1;
            }
            let n = split.len() as f64;
            for c in counts {
                assert!((c as f64 / n - 1.0 / 3.0).abs() < 0.05, "label marginal {c} of {n}");
            }
        }
    }

    #[test]
    fn generator_and_detector_agree_on_cues() {
        // every length-cued hypothesis is short and flag_length fires;
        // every overlap-cued example reaches the overlap flag; plain
        // examples trip nothing
        let (thresholds, lexicon) = defaults();
        let config = SynthConfig { n_train: 2000, n_test: 100, ..SynthConfig::default() };
        let corpus = generate(&config).unwrap();
        let profiles = profile_all(&corpus.train, &thresholds, &lexicon);
        for p in &profiles {
            if p.flag_length {
                assert!(p.hyp_len <= 5, "length-cued hypothesis of {} tokens", p.hyp_len);
            }
            if p.flag_overlap {
                assert!(p.overlap >= 0.8);
            }
            // each artifact family trips only its own flag
            let fired: usize = [p.flag_length, p.flag_overlap, p.flag_negation]
                .iter()
                .map(|f| usize::from(*f))
                .sum();
            assert!(fired <= 1, "cue families overlap: {p:?}");
        }
        // all three families present under the default mix
        assert!(profiles.iter().any(|p| p.flag_length));
        assert!(profiles.iter().any(|p| p.flag_overlap));
        assert!(profiles.iter().any(|p| p.flag_negation));
        assert!(profiles.iter().any(|p| p.flag_subset));
    }

    #[test]
    fn unbiased_config_has_uniform_correlations() {
        let (thresholds, lexicon) = defaults();
        let config = SynthConfig {
            n_train: 10_000,
            n_test: 100,
            bias_strength: 1.0 / 3.0,
            ..SynthConfig::default()
        };
        let corpus = generate(&config).unwrap();
        let report = audit(&corpus, &thresholds, &lexicon);
        for corr in [report.train.length, report.train.overlap, report.train.negation] {
            let c = corr.correlation.unwrap();
            assert!((c - 1.0 / 3.0).abs() < 0.05, "correlation {c}");
        }
    }

    #[test]
    fn biased_config_realizes_configured_correlation() {
        // independent empirical recount at n = 10,000
        let (thresholds, lexicon) = defaults();
        let config = SynthConfig { n_train: 10_000, n_test: 100, ..SynthConfig::default() };
        let corpus = generate(&config).unwrap();

        let profiles = profile_all(&corpus.train, &thresholds, &lexicon);
        let flagged: Vec<usize> = profiles
            .iter()
            .enumerate()
            .filter(|(_, p)| p.flag_length)
            .map(|(i, _)| i)
            .collect();
        let agree = flagged
            .iter()
            .filter(|&&i| corpus.train[i].gold == Label::Entailment)
            .count();
        let fraction = agree as f64 / flagged.len() as f64;
        assert!((fraction - 0.9).abs() <= 0.02, "length correlation {fraction}");

        // audit reports the same recount
        let report = audit(&corpus, &thresholds, &lexicon);
        assert_eq!(report.train.length.population, flagged.len());
        assert!((report.train.length.correlation.unwrap() - fraction).abs() < 1e-12);
    }

    #[test]
    fn anti_split_correlation_is_inverted() {
        let (thresholds, lexicon) = defaults();
        let config = SynthConfig {
            n_train: 10_000,
            n_test: 10_000,
            ..SynthConfig::default()
        };
        let corpus = generate(&config).unwrap();
        let report = audit(&corpus, &thresholds, &lexicon);
        for corr in [report.test_anti.length, report.test_anti.overlap, report.test_anti.negation]
        {
            let c = corr.correlation.unwrap();
            assert!(c < 1.0 / 3.0 + 0.05, "anti correlation {c} not inverted");
        }
        assert!((report.train.overlap.correlation.unwrap() - 0.9).abs() <= 0.02);
    }

    #[test]
    fn zero_negation_weight_gates_the_generator() {
        let (thresholds, lexicon) = defaults();
        let config = SynthConfig {
            n_train: 3000,
            n_test: 100,
            artifact_mix: ArtifactMix { length: 1.0, overlap: 1.0, negation: 0.0 },
            ..SynthConfig::default()
        };
        let corpus = generate(&config).unwrap();
        let report = audit(&corpus, &thresholds, &lexicon);
        assert_eq!(report.train.negation.population, 0);
        assert_eq!(report.train.negation.correlation, None);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(matches!(
            generate(&SynthConfig { bias_strength: 0.3, ..SynthConfig::default() }),
            Err(SynthError::BadBias(_))
        ));
        assert!(generate(&SynthConfig {
            artifact_mix: ArtifactMix { length: 0.0, overlap: 0.0, negation: 0.0 },
            ..SynthConfig::default()
        })
        .is_err());
        assert!(generate(&SynthConfig { n_train: 0, ..SynthConfig::default() }).is_err());
    }
}
