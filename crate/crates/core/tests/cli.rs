//! End-to-end command-line behavior: outputs, composition, exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nli_artifacts::model::{save_checkpoint, Checkpoint, ModelParams, TrainConfig};
use nli_artifacts::rng::Xoshiro256StarStar;

fn nliart(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nliart"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let output = nliart(args);
    assert!(
        output.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn path_str(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_worked_examples(dir: &Path) -> PathBuf {
    let path = dir.join("worked.jsonl");
    let lines = [
        r#"{"id":"length","premise":"Woman wearing a red sweater, brown slacks and a white hat, rollerblading on the street in front of a yellow building.","hypothesis":"This woman is indoors.","label":"contradiction"}"#,
        r#"{"id":"overlap","premise":"Three people are outside walking up a set of wooden stairs.","hypothesis":"Three people are walking outside down a set of stairs.","label":"contradiction"}"#,
        r#"{"id":"negation","premise":"Female runners from Japan, Germany and China are running side by side.","hypothesis":"The runners are not from the US.","label":"entailment"}"#,
        r#"{"id":"subset","premise":"A man in a blue shirt, khaki shorts, ball cap and white socks and loafers walking behind a group of people walking down a stone walkway with a water bottle in his left hand.","hypothesis":"A man in a blue shirt, khaki shorts, ball cap and blue socks and loafers walking behind a group of people walking down a stone walkway with a water bottle in his left hand.","label":"contradiction"}"#,
    ];
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    path
}

#[test]
fn profile_emits_expected_rows_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let examples = write_worked_examples(dir.path());
    let out = dir.path().join("out");
    run_ok(&["profile", "--examples", path_str(&examples), "--out", path_str(&out)]);

    let csv = fs::read_to_string(out.join("profiles.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);

    let field = |id: &str, idx: usize| -> String {
        rows.iter()
            .find(|r| r.starts_with(id))
            .unwrap()
            .split(',')
            .nth(idx)
            .unwrap()
            .to_string()
    };
    // header: id,prem_len,hyp_len,length_diff,overlap,is_subset,
    //         has_negation,flag_length,flag_overlap,flag_subset,flag_negation
    assert_eq!(field("length", 3), "17");
    assert_eq!(field("length", 7), "1"); // flag_length
    assert_eq!(field("overlap", 4), "0.9000");
    assert_eq!(field("overlap", 8), "1"); // flag_overlap
    assert_eq!(field("subset", 4), "1.0000");
    assert_eq!(field("subset", 9), "1"); // flag_subset
    assert_eq!(field("negation", 10), "1"); // flag_negation

    assert!(out.join("prevalence.json").exists());
    assert!(out.join("cooccurrence.csv").exists());
    assert!(out.join("manifest.json").exists());
}

#[test]
fn profile_unreadable_path_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = nliart(&[
        "profile",
        "--examples",
        "/nonexistent/input.jsonl",
        "--out",
        path_str(&dir.path().join("out")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_flag_value_exits_1_with_usage() {
    let out = nliart(&["train", "--examples", "x.jsonl", "--out", "y", "--epochs", "abc"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.to_lowercase().contains("usage") || stderr.contains("--epochs"), "{stderr}");
}

#[test]
fn evaluate_perfect_predictions_and_order_invariance() {
    let dir = tempfile::tempdir().unwrap();
    let examples = write_worked_examples(dir.path());

    // perfect predictions, in shuffled order for the second run
    let make_predictions = |ids: &[(&str, usize)]| -> String {
        ids.iter()
            .map(|(id, code)| {
                let mut probs = [0.05, 0.05, 0.05];
                probs[*code] = 0.9;
                format!(r#"{{"id":"{id}","probs":[{},{},{}]}}"#, probs[0], probs[1], probs[2])
            })
            .collect::<Vec<_>>()
            .join("\n")
            + "\n"
    };
    let ordered = [("length", 2), ("overlap", 2), ("negation", 0), ("subset", 2)];
    let shuffled = [("subset", 2), ("negation", 0), ("length", 2), ("overlap", 2)];

    let mut reports = Vec::new();
    for (name, order) in [("a", &ordered), ("b", &shuffled)] {
        let preds = dir.path().join(format!("{name}.jsonl"));
        fs::write(&preds, make_predictions(order)).unwrap();
        let out = dir.path().join(name);
        run_ok(&[
            "evaluate",
            "--examples",
            path_str(&examples),
            "--predictions",
            path_str(&preds),
            "--out",
            path_str(&out),
        ]);
        reports.push(fs::read(out.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1], "report.json depends on prediction order");

    let report: serde_json::Value =
        serde_json::from_slice(&reports[0]).unwrap();
    assert_eq!(report["accuracy"], 1.0);
    assert_eq!(report["total_errors"], 0);
}

#[test]
fn evaluate_alignment_failure_names_missing_id() {
    let dir = tempfile::tempdir().unwrap();
    let examples = write_worked_examples(dir.path());
    let preds = dir.path().join("short.jsonl");
    fs::write(&preds, "{\"id\":\"length\",\"probs\":[1.0,0.0,0.0]}\n").unwrap();
    let out = nliart(&[
        "evaluate",
        "--examples",
        path_str(&examples),
        "--predictions",
        path_str(&preds),
        "--out",
        path_str(&dir.path().join("out")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("overlap"), "missing ids not named: {stderr}");
}

fn synth_corpus(dir: &Path, n_train: usize, seed: u64) -> PathBuf {
    let out = dir.join(format!("synth{seed}"));
    run_ok(&[
        "synth",
        "--n-train",
        &n_train.to_string(),
        "--n-test",
        "60",
        "--seed",
        &seed.to_string(),
        "--out",
        path_str(&out),
    ]);
    out.join("train.jsonl")
}

#[test]
fn train_baseline_history_has_total_equal_ce() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(dir.path(), 200, 5);
    let out = dir.path().join("run");
    run_ok(&[
        "train",
        "--examples",
        path_str(&corpus),
        "--out",
        path_str(&out),
        "--epochs",
        "2",
        "--batch-size",
        "16",
        "--eval-every",
        "1",
        "--lambda-len",
        "0",
        "--lambda-ov",
        "0",
        "--lambda-con",
        "0",
    ]);
    let history = fs::read_to_string(out.join("history.csv")).unwrap();
    let mut rows = 0;
    for line in history.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[1], cols[5], "ce and total differ in row {line}");
        rows += 1;
    }
    assert!(rows > 0);
}

#[test]
fn train_default_manifest_echoes_reference_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(dir.path(), 64, 9);
    let out = dir.path().join("run");
    run_ok(&["train", "--examples", path_str(&corpus), "--out", path_str(&out), "--epochs", "1"]);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let config = &manifest["resolved_config"]["train"];
    assert_eq!(config["weight_decay"], 0.01);
    assert_eq!(config["clip_norm"], 1.0);
    assert_eq!(config["batch_size"], 32);
    assert_eq!(config["accumulation_steps"], 2);
    assert_eq!(config["lambda_length"], 0.05);
    assert_eq!(config["temperature"], 1.0);
    // epochs overridden on the command line above; the default is asserted
    // through TrainConfig itself
    assert_eq!(TrainConfig::default().epochs, 5);
    assert_eq!(manifest["seed"], 0);
    assert!(manifest["inputs"][0]["sha256"].as_str().unwrap().len() == 64);
}

#[test]
fn train_config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(dir.path(), 64, 13);
    let config_path = dir.path().join("config.json");
    fs::write(&config_path, r#"{"epochs": 1, "batch_size": 16, "seed": 42}"#).unwrap();
    let out = dir.path().join("run");
    run_ok(&[
        "train",
        "--examples",
        path_str(&corpus),
        "--config",
        path_str(&config_path),
        "--seed",
        "7",
        "--out",
        path_str(&out),
    ]);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    // flag wins over config file; config file wins over defaults
    assert_eq!(manifest["resolved_config"]["train"]["seed"], 7);
    assert_eq!(manifest["resolved_config"]["train"]["batch_size"], 16);
}

#[test]
fn predict_then_evaluate_composes() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(dir.path(), 200, 21);
    let run = dir.path().join("run");
    run_ok(&[
        "train",
        "--examples",
        path_str(&corpus),
        "--out",
        path_str(&run),
        "--epochs",
        "1",
        "--batch-size",
        "16",
    ]);
    let pred_out = dir.path().join("pred");
    run_ok(&[
        "predict",
        "--checkpoint",
        path_str(&run.join("checkpoint.json")),
        "--examples",
        path_str(&corpus),
        "--out",
        path_str(&pred_out),
    ]);
    let eval_out = dir.path().join("eval");
    run_ok(&[
        "evaluate",
        "--examples",
        path_str(&corpus),
        "--predictions",
        path_str(&pred_out.join("predictions.jsonl")),
        "--out",
        path_str(&eval_out),
    ]);
    assert!(eval_out.join("report.json").exists());

    // output line count equals loaded example count
    let n_examples = fs::read_to_string(&corpus).unwrap().lines().count();
    let n_predictions = fs::read_to_string(pred_out.join("predictions.jsonl"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(n_examples, n_predictions);
}

#[test]
fn predict_skips_unlabeled_lines() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(dir.path(), 64, 23);
    // append an unlabeled record
    let mut body = fs::read_to_string(&corpus).unwrap();
    body.push_str("{\"premise\":\"A man naps.\",\"hypothesis\":\"Someone rests.\",\"label\":\"-\"}\n");
    let padded = dir.path().join("padded.jsonl");
    fs::write(&padded, &body).unwrap();

    let run = dir.path().join("run");
    run_ok(&[
        "train", "--examples", path_str(&corpus), "--out", path_str(&run), "--epochs", "1",
        "--batch-size", "16",
    ]);
    let pred_out = dir.path().join("pred");
    run_ok(&[
        "predict",
        "--checkpoint",
        path_str(&run.join("checkpoint.json")),
        "--examples",
        path_str(&padded),
        "--out",
        path_str(&pred_out),
    ]);
    let n_predictions = fs::read_to_string(pred_out.join("predictions.jsonl"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(n_predictions, body.lines().count() - 1);
}

#[test]
fn predict_zero_classifier_gives_uniform_probs() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(dir.path(), 64, 29);
    let config = TrainConfig { hidden: 16, vocab: 256, ..TrainConfig::default() };
    let mut params =
        ModelParams::init(&config, &mut Xoshiro256StarStar::seed_from_u64(1)).unwrap();
    params.cls_w.iter_mut().for_each(|x| *x = 0.0);
    params.cls_b.iter_mut().for_each(|x| *x = 0.0);
    let checkpoint_path = dir.path().join("zero.json");
    save_checkpoint(&checkpoint_path, &Checkpoint::new(config, 0, params)).unwrap();

    let pred_out = dir.path().join("pred");
    run_ok(&[
        "predict",
        "--checkpoint",
        path_str(&checkpoint_path),
        "--examples",
        path_str(&corpus),
        "--out",
        path_str(&pred_out),
    ]);
    for line in fs::read_to_string(pred_out.join("predictions.jsonl")).unwrap().lines() {
        let record: serde_json::Value = serde_json::from_str(line).unwrap();
        for p in record["probs"].as_array().unwrap() {
            assert!((p.as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
        }
    }
}

#[test]
fn predict_rejects_corrupt_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(dir.path(), 64, 31);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"version\": 1, \"step\": 0}").unwrap();
    let out = nliart(&[
        "predict",
        "--checkpoint",
        path_str(&bad),
        "--examples",
        path_str(&corpus),
        "--out",
        path_str(&dir.path().join("pred")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn synth_rejects_bias_below_floor() {
    let dir = tempfile::tempdir().unwrap();
    let out = nliart(&[
        "synth",
        "--bias",
        "0.3",
        "--out",
        path_str(&dir.path().join("out")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bias_strength"), "{stderr}");
}

#[test]
fn synth_audit_realizes_configured_bias_at_scale() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    run_ok(&[
        "synth",
        "--bias",
        "0.9",
        "--n-train",
        "10000",
        "--n-test",
        "100",
        "--seed",
        "1",
        "--out",
        path_str(&out),
    ]);
    let audit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("audit.json")).unwrap()).unwrap();
    for artifact in ["length", "overlap", "negation"] {
        let c = audit["train"][artifact]["correlation"].as_f64().unwrap();
        assert!((c - 0.9).abs() <= 0.02, "{artifact} correlation {c}");
    }
}
