//! Command implementations. Each command materializes its resolved
//! configuration, digests its inputs, writes its primary outputs, and
//! finishes with a manifest in the output directory.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read};
use std::path::Path;
use std::time::Instant;

use serde_json::json;

use nli_artifacts::artifacts::{
    cooccurrence, prevalence, profile_all, write_cooccurrence_csv, write_profiles_csv,
    NegationLexicon, Thresholds,
};
use nli_artifacts::corpus::{
    align, load_examples, load_predictions, write_examples, write_predictions, Example,
    SkipReport,
};
use nli_artifacts::metrics::evaluate as evaluate_pairs;
use nli_artifacts::model::{
    load_checkpoint, predict as predict_examples, save_checkpoint, train as train_model,
    Checkpoint, ContrastiveVariant, TrainConfig,
};
use nli_artifacts::synth::{audit, generate, ArtifactMix, SynthConfig};

use super::manifest::RunManifest;
use super::{
    CliError, EvaluateArgs, PredictArgs, ProfileArgs, SynthArgs, ThresholdArgs, TrainArgs,
};

fn ensure_out_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn open_reader(path: &Path) -> Result<BufReader<File>, CliError> {
    Ok(BufReader::new(File::open(path).map_err(|e| CliError::io(path, e))?))
}

fn create_writer(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(|e| CliError::io(path, e))?))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let body = serde_json::to_string_pretty(value).expect("report serialization");
    fs::write(path, body + "\n").map_err(|e| CliError::io(path, e))
}

fn read_examples_file(path: &Path) -> Result<(Vec<Example>, SkipReport), CliError> {
    Ok(load_examples(open_reader(path)?)?)
}

fn thresholds_from(args: &ThresholdArgs) -> Result<Thresholds, CliError> {
    let thresholds = Thresholds {
        length_diff_min: args.length_min,
        overlap_min: args.overlap_min,
    };
    thresholds.validate()?;
    Ok(thresholds)
}

fn load_lexicon(path: &Path) -> Result<NegationLexicon, CliError> {
    let mut text = String::new();
    File::open(path)
        .map_err(|e| CliError::io(path, e))?
        .read_to_string(&mut text)
        .map_err(|e| CliError::io(path, e))?;
    let cues = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect::<Vec<_>>();
    Ok(NegationLexicon::from_cues(cues)?)
}

pub fn profile(args: ProfileArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let thresholds = thresholds_from(&args.thresholds)?;
    let mut lexicon = match &args.lexicon {
        Some(path) => load_lexicon(path)?,
        None => NegationLexicon::default(),
    };
    lexicon.include_premise = args.negation_in_premise;

    let (examples, skip_report) = read_examples_file(&args.examples)?;
    let profiles = profile_all(&examples, &thresholds, &lexicon);
    let prevalence_report = prevalence(&profiles)?;
    let matrix = cooccurrence(&profiles);

    ensure_out_dir(&args.out)?;
    let profiles_path = args.out.join("profiles.csv");
    write_profiles_csv(create_writer(&profiles_path)?, &profiles)
        .map_err(|e| CliError::io(&profiles_path, e))?;
    write_json(&args.out.join("prevalence.json"), &prevalence_report)?;
    let cooc_path = args.out.join("cooccurrence.csv");
    write_cooccurrence_csv(create_writer(&cooc_path)?, &matrix)
        .map_err(|e| CliError::io(&cooc_path, e))?;

    let mut manifest = RunManifest::new(
        "profile",
        None,
        json!({
            "thresholds": thresholds,
            "lexicon": {
                "source": args.lexicon.as_ref().map(|p| p.display().to_string()),
                "cue_count": lexicon.cues().count(),
                "include_premise": lexicon.include_premise,
            },
            "ingest": skip_report,
        }),
    );
    manifest.add_input(&args.examples)?;
    if let Some(path) = &args.lexicon {
        manifest.add_input(path)?;
    }
    manifest.duration_seconds = start.elapsed().as_secs_f64();
    manifest.write(&args.out)?;
    println!(
        "profiled {} example(s); {} with at least one artifact flag",
        prevalence_report.total_examples, prevalence_report.any_artifact_count
    );
    Ok(())
}

pub fn evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let thresholds = thresholds_from(&args.thresholds)?;
    let lexicon = NegationLexicon::default();

    let (examples, skip_report) = read_examples_file(&args.examples)?;
    let predictions = load_predictions(open_reader(&args.predictions)?)?;
    let pairs = align(&examples, &predictions)?;
    let profiles = profile_all(&examples, &thresholds, &lexicon);
    let report = evaluate_pairs(&pairs, &profiles)?;

    ensure_out_dir(&args.out)?;
    fs::write(args.out.join("report.json"), report.to_json() + "\n")
        .map_err(|e| CliError::io(&args.out.join("report.json"), e))?;
    let confusion_path = args.out.join("confusion.csv");
    report
        .write_confusion_csv(create_writer(&confusion_path)?)
        .map_err(|e| CliError::io(&confusion_path, e))?;
    let transitions_path = args.out.join("transitions.csv");
    report
        .write_transitions_csv(create_writer(&transitions_path)?)
        .map_err(|e| CliError::io(&transitions_path, e))?;
    let slices_path = args.out.join("bias_slices.csv");
    report
        .write_bias_slices_csv(create_writer(&slices_path)?)
        .map_err(|e| CliError::io(&slices_path, e))?;
    let bins_path = args.out.join("bins.csv");
    report
        .write_bins_csv(create_writer(&bins_path)?)
        .map_err(|e| CliError::io(&bins_path, e))?;

    let mut manifest = RunManifest::new(
        "evaluate",
        None,
        json!({ "thresholds": thresholds, "ingest": skip_report }),
    );
    manifest.add_input(&args.examples)?;
    manifest.add_input(&args.predictions)?;
    manifest.duration_seconds = start.elapsed().as_secs_f64();
    manifest.write(&args.out)?;
    println!(
        "evaluated {} pair(s): accuracy {:.4}, {} error(s)",
        report.total_pairs, report.accuracy, report.total_errors
    );
    Ok(())
}

fn resolve_train_config(args: &TrainArgs) -> Result<TrainConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => {
            let body =
                fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            serde_json::from_str::<TrainConfig>(&body)
                .map_err(|e| CliError::Validation(format!("invalid config file: {e}")))?
        }
        None => TrainConfig::default(),
    };
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.epochs {
        config.epochs = v;
    }
    if let Some(v) = args.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = args.lr {
        config.learning_rate = v;
    }
    if let Some(v) = args.lambda_len {
        config.lambda_length = v;
    }
    if let Some(v) = args.lambda_ov {
        config.lambda_overlap = v;
    }
    if let Some(v) = args.lambda_con {
        config.lambda_contrastive = v;
    }
    if let Some(v) = args.temperature {
        config.temperature = v;
    }
    if let Some(v) = args.hidden {
        config.hidden = v;
    }
    if let Some(v) = args.vocab {
        config.vocab = v;
    }
    if let Some(v) = args.accum {
        config.accumulation_steps = v;
    }
    if let Some(v) = args.warmup {
        config.warmup_steps = v;
    }
    if let Some(v) = args.eval_every {
        config.eval_every = v;
    }
    if let Some(v) = args.weight_decay {
        config.weight_decay = v;
    }
    if let Some(v) = args.clip_norm {
        config.clip_norm = v;
    }
    if args.no_shuffle {
        config.shuffle = false;
    }
    if let Some(v) = &args.contrastive {
        config.contrastive_variant = match v.as_str() {
            "literal" => ContrastiveVariant::Literal,
            "infonce" => ContrastiveVariant::InfoNce,
            other => {
                return Err(CliError::Validation(format!(
                    "unknown contrastive variant '{other}'; expected 'literal' or 'infonce'"
                )))
            }
        };
    }
    config.validate()?;
    Ok(config)
}

pub fn train(args: TrainArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let config = resolve_train_config(&args)?;
    let (examples, skip_report) = read_examples_file(&args.examples)?;
    let result = train_model(&examples, &config)?;

    ensure_out_dir(&args.out)?;
    let history_path = args.out.join("history.csv");
    result
        .write_history_csv(create_writer(&history_path)?)
        .map_err(|e| CliError::io(&history_path, e))?;
    let checkpoint = Checkpoint::new(config.clone(), result.steps, result.params);
    save_checkpoint(&args.out.join("checkpoint.json"), &checkpoint)?;

    let mut manifest = RunManifest::new(
        "train",
        Some(config.seed),
        json!({ "train": config, "ingest": skip_report }),
    );
    manifest.add_input(&args.examples)?;
    if let Some(path) = &args.config {
        manifest.add_input(path)?;
    }
    manifest.duration_seconds = start.elapsed().as_secs_f64();
    manifest.write(&args.out)?;

    let last = result.history.last();
    println!(
        "trained {} step(s); final total loss {}, accuracy {}",
        result.steps,
        last.map_or("n/a".into(), |h| h.loss.total.to_string()),
        last.map_or("n/a".into(), |h| h.eval_accuracy.to_string()),
    );
    Ok(())
}

pub fn predict(args: PredictArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let checkpoint = load_checkpoint(&args.checkpoint)?;
    let (examples, skip_report) = read_examples_file(&args.examples)?;
    let predictions = predict_examples(&checkpoint.params, &examples);

    ensure_out_dir(&args.out)?;
    let out_path = args.out.join("predictions.jsonl");
    write_predictions(create_writer(&out_path)?, &predictions)?;

    let mut manifest = RunManifest::new(
        "predict",
        None,
        json!({
            "checkpoint": {
                "step": checkpoint.step,
                "hidden": checkpoint.config.hidden,
                "vocab": checkpoint.config.vocab,
                "seed": checkpoint.config.seed,
            },
            "ingest": skip_report,
        }),
    );
    manifest.add_input(&args.checkpoint)?;
    manifest.add_input(&args.examples)?;
    manifest.duration_seconds = start.elapsed().as_secs_f64();
    manifest.write(&args.out)?;
    println!("wrote {} prediction(s)", predictions.len());
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let config = SynthConfig {
        n_train: args.n_train,
        n_test: args.n_test,
        bias_strength: args.bias,
        artifact_mix: ArtifactMix {
            length: args.mix_length,
            overlap: args.mix_overlap,
            negation: args.mix_negation,
        },
        seed: args.seed,
    };
    let corpus = generate(&config)?;
    let report = audit(&corpus, &Thresholds::default(), &NegationLexicon::default());

    ensure_out_dir(&args.out)?;
    for (name, split) in [
        ("train.jsonl", &corpus.train),
        ("test_aligned.jsonl", &corpus.test_aligned),
        ("test_anti.jsonl", &corpus.test_anti),
    ] {
        let path = args.out.join(name);
        write_examples(create_writer(&path)?, split)?;
    }
    write_json(&args.out.join("audit.json"), &report)?;

    let mut manifest = RunManifest::new("synth", Some(config.seed), json!({ "synth": config }));
    manifest.duration_seconds = start.elapsed().as_secs_f64();
    manifest.write(&args.out)?;
    println!(
        "generated {} train / {} aligned / {} anti example(s)",
        corpus.train.len(),
        corpus.test_aligned.len(),
        corpus.test_anti.len()
    );
    Ok(())
}
