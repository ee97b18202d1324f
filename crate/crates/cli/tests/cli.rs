use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fairbayes::fairness::{FairnessSpec, Measure, Notion};
use fairbayes::measures::empirical_report;
use fairbayes_cli::config::RunConfig;
use fairbayes_cli::ingest::ingest;
use fairbayes_cli::record::ModelRecord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fairbayes"));
    cmd.env("RUST_LOG", "error");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}); stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

/// Two groups, a group-shifted feature, a noise feature and a categorical column.
fn write_dataset(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut body = String::from("x1,x2,color,s,y\n");
    for _ in 0..n {
        let s = rng.random_bool(0.5);
        let x1 = rng.random_range(-1.0..1.0) + if s { 0.8 } else { -0.8 };
        let x2: f64 = rng.random_range(-1.5..1.5);
        let color = ["red", "green", "blue"][rng.random_range(0..3)];
        let p = 1.0 / (1.0 + (-(0.8 * x1 + x2)).exp());
        let y = rng.random_bool(p) as u8;
        body.push_str(&format!("{x1},{x2},{color},{},{y}\n", if s { "b" } else { "a" }));
    }
    let path = dir.join("data.csv");
    fs::write(&path, body).unwrap();
    path
}

fn base_args<'a>(data: &'a str, out: &'a str) -> Vec<&'a str> {
    vec![
        "--dataset", data, "--target", "y", "--sensitive", "s", "--categorical", "color", "--output-dir", out,
    ]
}

#[test]
fn help_and_usage_exit_codes() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    let bad = run(&["frontier", "--no-such-flag"]);
    assert_eq!(bad.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&bad.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");
}

#[test]
fn data_errors_exit_two_with_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "x,s,y,prediction\n1,a,0,0\n2,b,2,1\n3,a,1,1\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "audit",
        "--dataset",
        path.to_str().unwrap(),
        "--target",
        "y",
        "--sensitive",
        "s",
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    let message = err["error"]["message"].as_str().unwrap();
    assert!(message.contains("row 2") && message.contains("'y'"), "{message}");

    let missing = run(&["frontier", "--dataset", path.to_str().unwrap(), "--target", "y", "--sensitive", "race"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn audit_of_the_labels_is_accuracy_parity_fair_and_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path(), 400, 1);
    let text = fs::read_to_string(&data).unwrap();
    let mut lines = text.lines();
    let mut body = format!("{},prediction\n", lines.next().unwrap());
    for line in lines {
        let y = line.rsplit(',').next().unwrap();
        body.push_str(&format!("{line},{y}\n"));
    }
    let with_predictions = dir.path().join("pred.csv");
    fs::write(&with_predictions, body).unwrap();
    let out_dir = dir.path().join("out");
    let args = [
        "audit",
        "--dataset",
        with_predictions.to_str().unwrap(),
        "--target",
        "y",
        "--sensitive",
        "s",
        "--categorical",
        "color",
        "--notion",
        "AP",
        "--output-dir",
        out_dir.to_str().unwrap(),
    ];
    let out = run(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_eq!(summary["fairness"]["value"].as_f64().unwrap(), 0.0);
    assert_eq!(summary["accuracy"].as_f64().unwrap(), 1.0);
    assert!(out_dir.join("audit.json").exists());

    let dp = run(&[&args[..args.len() - 4], &["--notion", "DP", "--output-dir", out_dir.to_str().unwrap()]].concat());
    let reported = stdout_json(&dp)["fairness"]["value"].as_f64().unwrap();
    let config = RunConfig {
        dataset: Some(with_predictions),
        target: Some("y".into()),
        sensitive: vec!["s".into()],
        categorical: vec!["color".into()],
        ..Default::default()
    };
    let (_, dataset) = ingest(&config, &["prediction".into()]).unwrap();
    let labels: Vec<f64> = dataset.labels().iter().map(|&y| y as f64).collect();
    let spec = FairnessSpec::new(Notion::DemographicParity, Measure::MeanDifference, 0.05).unwrap();
    let direct = empirical_report(&labels, &dataset, &spec).unwrap().value;
    assert_eq!(reported, direct);
}

#[test]
fn frontier_at_the_origin_only() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path(), 600, 2);
    let out_dir = dir.path().join("out");
    let mut args = vec!["frontier"];
    args.extend(base_args(data.to_str().unwrap(), out_dir.to_str().unwrap()));
    args.extend(["--grid", "0"]);
    let out = run(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("frontier.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "lambda_1,lambda_2,accuracy,cs_risk,fairness_value,split");
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("0,0,") && rows[1].ends_with(",tune"));
    assert!(rows[2].starts_with("0,0,") && rows[2].ends_with(",test"));
}

#[test]
fn frontier_files_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path(), 800, 3);
    let mut files = Vec::new();
    for run_id in ["a", "b"] {
        let out_dir = dir.path().join(run_id);
        let mut args = vec!["frontier"];
        args.extend(base_args(data.to_str().unwrap(), out_dir.to_str().unwrap()));
        args.extend(["--method", "inprocess", "--seed", "11", "--grid-resolution", "5"]);
        let out = run(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        files.push(fs::read(out_dir.join("frontier.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn saved_model_predicts_like_the_fitted_one() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path(), 1_000, 4);
    let out_dir = dir.path().join("out");
    let mut args = vec!["postprocess"];
    args.extend(base_args(data.to_str().unwrap(), out_dir.to_str().unwrap()));
    args.extend(["--lambda", "0.3,-0.3"]);
    let out = run(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = stdout_json(&out);
    assert_eq!(metrics["lambda"], serde_json::json!([0.3, -0.3]));

    let model = out_dir.join("model.json");
    let predictions = dir.path().join("p.csv");
    let out = run(&[
        "predict",
        "--model",
        model.to_str().unwrap(),
        "--dataset",
        data.to_str().unwrap(),
        "--output",
        predictions.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let record = ModelRecord::load(&model).unwrap();
    let config = RunConfig {
        dataset: Some(data),
        target: Some("y".into()),
        sensitive: vec!["s".into()],
        categorical: vec!["color".into()],
        ..Default::default()
    };
    let (_, dataset) = ingest(&config, &[]).unwrap();
    let expected = record.classifier.predict(&dataset).unwrap();
    let written: Vec<f64> = fs::read_to_string(&predictions)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(written, expected);

    let reloaded: ModelRecord = serde_json::from_str(&serde_json::to_string(&record).unwrap()).unwrap();
    assert_eq!(reloaded, record);
}

#[test]
fn unattainable_tolerance_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path(), 600, 5);
    let out_dir = dir.path().join("out");
    let mut args = vec!["postprocess"];
    args.extend(base_args(data.to_str().unwrap(), out_dir.to_str().unwrap()));
    args.extend(["--grid", "0"]);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn oracle_check_is_deterministic_and_passes() {
    let a = run(&["oracle-check", "--instances", "15", "--seed", "9"]);
    let b = run(&["oracle-check", "--instances", "15", "--seed", "9"]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout_json(&a)["passed"], true);
    assert_eq!(run(&["oracle-check", "--instances", "0"]).status.code(), Some(1));
}
