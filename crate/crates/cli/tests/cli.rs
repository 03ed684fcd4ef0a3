use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const FAST: &[&str] = &[
    "--layers", "2", "--max-epochs", "25", "--patience", "10", "--mi-every", "10", "--jobs", "2",
];

fn hgib(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hgib"))
        .args(args)
        .env_remove("HGIB_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = hgib(args);
    assert!(
        out.status.success(),
        "hgib {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &TempDir) -> PathBuf {
    let path = dir.path().join("planted.json");
    ok(&["synth", "--output", s(&path), "--n-per-class", "25", "--d-feat", "8", "--edges-per-class", "5", "--seed", "3"]);
    path
}

fn train(dataset: &Path, out: &Path, extra: &[&str]) -> Value {
    let mut args = vec!["train", "--dataset", s(dataset), "--out", s(out)];
    args.extend_from_slice(FAST);
    args.extend_from_slice(extra);
    ok(&args);
    read_json(&out.join("manifest.json"))
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn cell_mean(results: &Value, row: &str, column: &str) -> f64 {
    results
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["cell"]["row"] == row && r["cell"]["column"] == column)
        .unwrap_or_else(|| panic!("no cell {row}/{column}"))["summary"]["mean"]
        .as_f64()
        .unwrap()
}

#[test]
fn train_writes_artifacts_and_prints_accuracy() {
    let dir = TempDir::new().unwrap();
    let ds = synth(&dir);
    let out = dir.path().join("run");
    let mut args = vec!["train", "--dataset", s(&ds), "--out", s(&out)];
    args.extend_from_slice(FAST);
    let stdout = ok(&args);
    assert!(stdout.starts_with("test accuracy: "));
    for f in ["training_log.csv", "layer_log.csv", "mi_log.csv", "checkpoint.json", "summary.json", "manifest.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let log = fs::read_to_string(out.join("training_log.csv")).unwrap();
    assert!(log.starts_with("epoch,loss,ce,kl,train_acc,val_acc\n"));
    let m = read_json(&out.join("manifest.json"));
    assert_eq!(m["command"], "train");
    assert_eq!(m["config"]["num_layers"], 2);
    assert_eq!(m["results"]["accuracies"].as_array().unwrap().len(), 1);
    assert!(m["environment"]["param_count"].as_u64().unwrap() > 0);
    let printed: f64 = stdout.trim().trim_start_matches("test accuracy: ").parse().unwrap();
    assert!((printed - m["results"]["mean"].as_f64().unwrap()).abs() < 5e-5);
}

#[test]
fn multiple_seeds_record_every_accuracy() {
    let dir = TempDir::new().unwrap();
    let ds = synth(&dir);
    let out = dir.path().join("seeds");
    let m = train(&ds, &out, &["--seeds", "10", "--seed", "4"]);
    let accs: Vec<f64> = m["results"]["accuracies"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(accs.len(), 10);
    let mean = accs.iter().sum::<f64>() / 10.0;
    let var = accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / 9.0;
    assert!((m["results"]["mean"].as_f64().unwrap() - mean).abs() < 1e-12);
    assert!((m["results"]["std"].as_f64().unwrap() - var.sqrt()).abs() < 1e-12);
    assert!(m["results"]["summary"].as_str().unwrap().contains('±'));
    for seed in 4..14 {
        assert!(out.join(format!("seed_{seed}/training_log.csv")).is_file());
    }
}

#[test]
fn missing_dataset_exits_with_parse_error() {
    let dir = TempDir::new().unwrap();
    let out = hgib(&["train", "--dataset", s(&dir.path().join("nope.json")), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("parse error"), "{err}");
}

#[test]
fn invalid_config_is_rejected() {
    let dir = TempDir::new().unwrap();
    let ds = synth(&dir);
    let out = hgib(&["train", "--dataset", s(&ds), "--alpha", "1.5", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let out = hgib(&["train", "--dataset", s(&ds), "--perturb", "shuffle:0.5", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn presets_and_overrides() {
    let dir = TempDir::new().unwrap();
    let ds = synth(&dir);
    let out = dir.path().join("preset");
    let m = train(&ds, &out, &["--preset", "citeseer", "--beta", "0.5"]);
    assert_eq!(m["config"]["beta"], 0.5);
    assert_eq!(m["config"]["num_layers"], 2);
    let cora = train(&ds, &dir.path().join("cora"), &["--alpha", "0.7", "--beta", "0.01", "--epsilon", "0"]);
    assert_eq!(cora["config"]["alpha"], 0.7);
    assert_eq!(cora["config"]["epsilon"], 0.0);
}

#[test]
fn perturbed_training_records_spec() {
    let dir = TempDir::new().unwrap();
    let ds = synth(&dir);
    let m = train(&ds, &dir.path().join("p"), &["--perturb", "add_hyperedges:0.5", "--perturb-seed", "7"]);
    assert_eq!(m["perturb"]["kind"], "add_hyperedges");
    assert_eq!(m["perturb"]["ratio"], 0.5);
    assert_eq!(m["perturb"]["seed"], 7);
}

#[test]
fn evaluate_reproduces_training_test_accuracy() {
    let dir = TempDir::new().unwrap();
    let ds = synth(&dir);
    let out = dir.path().join("e");
    let m = train(&ds, &out, &["--seed", "2"]);
    let stdout = ok(&["evaluate", "--dataset", s(&ds), "--checkpoint", s(&out.join("checkpoint.json"))]);
    let acc: f64 = stdout.trim().trim_start_matches("test accuracy: ").parse().unwrap();
    assert!((acc - m["results"]["mean"].as_f64().unwrap()).abs() < 5e-5);
    let bad = hgib(&["evaluate", "--dataset", s(&ds), "--checkpoint", s(&out.join("checkpoint.json")), "--mask", "holdout"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn same_seed_gives_identical_logs() {
    let dir = TempDir::new().unwrap();
    let ds = synth(&dir);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    train(&ds, &a, &["--seed", "9"]);
    train(&ds, &b, &["--seed", "9"]);
    for f in ["training_log.csv", "layer_log.csv", "mi_log.csv", "checkpoint.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn replay_matches_and_detects_tampering() {
    let dir = TempDir::new().unwrap();
    let ds = synth(&dir);
    let out = dir.path().join("r");
    train(&ds, &out, &["--seeds", "2", "--perturb", "delete_hyperedges:0.3"]);
    let manifest = out.join("manifest.json");
    let stdout = ok(&["replay", "--manifest", s(&manifest)]);
    assert!(stdout.starts_with("replay matches"));

    let mut m = read_json(&manifest);
    m["results"]["runs"][0]["test_acc"] = Value::from(0.123);
    let tampered = dir.path().join("tampered.json");
    fs::write(&tampered, serde_json::to_string(&m).unwrap()).unwrap();
    let out = hgib(&["replay", "--manifest", s(&tampered)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn perturbation_sweep_grid_shape() {
    let dir = TempDir::new().unwrap();
    let ds = synth(&dir);
    let out = dir.path().join("sweep");
    let mut args = vec![
        "sweep", "--dataset", s(&ds), "--perturb", "delete_hyperedges", "--ratios", "0.25,0.5,0.75",
        "--seeds", "2", "--gnuplot-script", "--out", s(&out),
    ];
    args.extend_from_slice(FAST);
    ok(&args);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "model,clean,delete_hyperedges:0.25,delete_hyperedges:0.5,delete_hyperedges:0.75"
    );
    assert_eq!(lines.len(), 2);
    let cells: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(cells[0], "hib");
    assert_eq!(cells.len(), 5);
    assert!(cells[1..].iter().all(|c| c.contains('±')));
    assert!(out.join("sweep.gp").is_file());
    assert_eq!(fs::read_to_string(out.join("sweep_long.csv")).unwrap().lines().count(), 5);
}

#[test]
fn sweep_cells_cover_kinds_ratios_and_models() {
    let dir = TempDir::new().unwrap();
    let ds = synth(&dir);
    let out = dir.path().join("grid");
    let mut args = vec![
        "sweep", "--dataset", s(&ds), "--perturb", "delete_hyperedges,add_hyperedges", "--ratios", "0.2,0.4",
        "--models", "hib,fixed", "--out", s(&out),
    ];
    args.extend_from_slice(FAST);
    ok(&args);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines.iter().all(|l| l.split(',').count() == 6));
    assert!(lines[1..].iter().all(|l| l.split(',').skip(1).all(|c| !c.is_empty())));
}

#[test]
fn hyperparameter_sweep_is_a_curve() {
    let dir = TempDir::new().unwrap();
    let ds = synth(&dir);
    let out = dir.path().join("curve");
    let mut args = vec![
        "sweep", "--dataset", s(&ds), "--vary", "alpha", "--range", "0.1:0.9:0.1", "--gnuplot-script", "--out", s(&out),
    ];
    args.extend_from_slice(&["--layers", "1", "--max-epochs", "5", "--patience", "5", "--mi-every", "0"]);
    ok(&args);
    let csv = fs::read_to_string(out.join("sweep_alpha.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "alpha,mean,std");
    assert_eq!(lines.len(), 10);
    assert_eq!(lines[1].split(',').next(), Some("0.1"));
    assert_eq!(lines[9].split(',').next(), Some("0.9"));
    assert!(out.join("sweep_alpha.gp").is_file());
}

#[test]
fn invalid_grids_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    let ds = synth(&dir);
    let o = s(dir.path());
    let d = s(&ds);
    for args in [
        vec!["sweep", "--dataset", d, "--perturb", "delete_hyperedges", "--out", o],
        vec!["sweep", "--dataset", d, "--perturb", "delete_hyperedges", "--ratios", "", "--out", o],
        vec!["sweep", "--dataset", d, "--perturb", "delete_hyperedges", "--ratios", "1.5", "--out", o],
        vec!["sweep", "--dataset", d, "--vary", "alpha", "--range", "0.9:0.1:0.1", "--out", o],
        vec!["sweep", "--dataset", d, "--vary", "gamma", "--range", "0.1:0.2:0.1", "--out", o],
        vec!["sweep", "--dataset", d, "--vary", "alpha", "--out", o],
        vec!["sweep", "--dataset", d, "--out", o],
    ] {
        let out = hgib(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn ablation_rows_match_direct_runs() {
    let dir = TempDir::new().unwrap();
    let ds = synth(&dir);
    let out = dir.path().join("ablate");
    let mut args = vec![
        "ablate", "--dataset", s(&ds), "--seed", "5", "--perturb", "add_hyperedges:0.5", "--out", s(&out),
    ];
    args.extend_from_slice(FAST);
    let stdout = ok(&args);
    let rows: Vec<&str> = stdout.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(rows, ["hib", "hib_ce", "fixed"]);
    assert!(stdout.starts_with("model,clean,add_hyperedges:0.5\n"));
    let results = read_json(&out.join("ablation.json"));

    let ce = train(&ds, &dir.path().join("ce"), &["--seed", "5", "--beta", "0"]);
    assert_eq!(cell_mean(&results, "hib_ce", "clean"), ce["results"]["mean"].as_f64().unwrap());
    let fixed = train(&ds, &dir.path().join("fixed"), &["--seed", "5", "--alpha", "1", "--beta", "0"]);
    assert_eq!(cell_mean(&results, "fixed", "clean"), fixed["results"]["mean"].as_f64().unwrap());
    let noisy = train(&ds, &dir.path().join("noisy"), &["--seed", "5", "--perturb", "add_hyperedges:0.5"]);
    assert_eq!(cell_mean(&results, "hib", "add_hyperedges:0.5"), noisy["results"]["mean"].as_f64().unwrap());
}

#[test]
fn out_dir_defaults_to_environment() {
    let dir = TempDir::new().unwrap();
    let ds = synth(&dir);
    let target = dir.path().join("from-env");
    let mut args = vec!["train", "--dataset", s(&ds)];
    args.extend_from_slice(FAST);
    let out = Command::new(env!("CARGO_BIN_EXE_hgib"))
        .args(&args)
        .env("HGIB_OUT_DIR", &target)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(target.join("manifest.json").is_file());
}

#[test]
fn synth_writes_loadable_dataset() {
    let dir = TempDir::new().unwrap();
    let ds = synth(&dir);
    let loaded = hgib_core::load_dataset(&ds).unwrap();
    assert_eq!(loaded.n_nodes(), 75);
    assert_eq!(loaded.n_classes, 3);
    assert_eq!(loaded.d_feat(), 8);
    assert_eq!(loaded.hypergraph().n_hyperedges(), 15);
}
