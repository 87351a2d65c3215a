use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mulch(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mulch"))
        .args(args)
        .current_dir(dir)
        .env_remove("MULCH_DATA_DIR")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn is_empty(dir: &Path) -> bool {
    fs::read_dir(dir).unwrap().next().is_none()
}

#[test]
fn usage_errors_exit_2_and_write_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cases: &[&[&str]] = &[
        &["tune", "--task", "synthetic:moons", "--bogus"],
        &["tune", "--task", "synthetic:moons", "--strategy", "annealing", "--out", "o"],
        &["tune", "--task", "synthetic:moons", "--space", "nonesuch", "--out", "o"],
        &["tune", "--out", "o"],
        &["tune", "--task", "synthetic:moons", "--budget", "-1", "--out", "o"],
        &["tune", "--task", "synthetic:moons", "--strategy", "fsl-bo", "--priors", "none", "--out", "o"],
        &["tune", "--task", "synthetic:moons", "--patience", "0", "--out", "o"],
        &["benchmark", "--out", "o"],
        &["fanova", "--out", "o.json"],
        &["fidelity-scores", "--task", "synthetic:moons", "--fidelities", "1.5", "--out", "o.csv"],
        &["learn-priors", "--histories", "*.jsonl", "--per-task", "2", "--top-fraction", "0.5"],
        &["report", "--runs", "missing-dir"],
        &["nonesuch"],
    ];
    for args in cases {
        let o = mulch(args, d);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(is_empty(d), "{args:?} wrote files");
    }
}

#[test]
fn help_and_version_exit_0() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&mulch(&["--help"], tmp.path())), 0);
    assert_eq!(code(&mulch(&["--version"], tmp.path())), 0);
    assert_eq!(code(&mulch(&["tune", "--help"], tmp.path())), 0);
}

#[test]
fn runtime_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mulch(&["tune", "--task", "synthetic:nope", "--strategy", "random", "--out", "o"], tmp.path());
    assert_eq!(code(&o), 1);
    let o = mulch(&["fanova", "--evals", "missing.csv", "--out", "o.json"], tmp.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn tune_writes_history_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = mulch(&["tune", "--task", "synthetic:moons", "--strategy", "bo", "--budget", "10", "--out", "run"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let history = fs::read_to_string(d.join("run/history.jsonl")).unwrap();
    assert_eq!(history.lines().count(), 10);
    assert!(!history.contains("wall_time\":0") && !history.contains("wall_time\":1"));
    let s: Value = serde_json::from_str(&fs::read_to_string(d.join("run/summary.json")).unwrap()).unwrap();
    assert_eq!(s["evaluations"], 10);
    assert_eq!(s["strategy"], "bo");
    assert!(s.get("wall_time").is_none());
    let best = s["best_metric"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&best));

    let o = mulch(
        &["tune", "--task", "synthetic:moons", "--strategy", "random", "--budget", "3", "--wall-time", "--out", "timed"],
        d,
    );
    assert_eq!(code(&o), 0);
    let s: Value = serde_json::from_str(&fs::read_to_string(d.join("timed/summary.json")).unwrap()).unwrap();
    assert!(s["wall_time"].as_f64().unwrap() > 0.0);
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(
        d.join("cfg.json"),
        r#"{"task": "synthetic:xor", "strategy": "random", "budget": 5, "out": "from-config"}"#,
    )
    .unwrap();
    assert_eq!(code(&mulch(&["--config", "cfg.json", "tune"], d)), 0);
    let s: Value = serde_json::from_str(&fs::read_to_string(d.join("from-config/summary.json")).unwrap()).unwrap();
    assert_eq!(s["evaluations"], 5);
    assert_eq!(s["task"], "xor");

    assert_eq!(code(&mulch(&["tune", "--config", "cfg.json", "--budget", "3", "--out", "flags"], d)), 0);
    let s: Value = serde_json::from_str(&fs::read_to_string(d.join("flags/summary.json")).unwrap()).unwrap();
    assert_eq!(s["evaluations"], 3);

    fs::write(d.join("bad.json"), "[1, 2]").unwrap();
    assert_eq!(code(&mulch(&["tune", "--config", "bad.json"], d)), 2);
}

#[test]
fn report_curves_are_monotone() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    for (strategy, seed) in [("random", "0"), ("random", "1"), ("random", "2"), ("bo", "0")] {
        let out = format!("runs/{strategy}-{seed}");
        let o = mulch(
            &["tune", "--task", "synthetic:circles", "--strategy", strategy, "--budget", "10", "--seed", seed, "--out", &out],
            d,
        );
        assert_eq!(code(&o), 0);
    }
    assert_eq!(code(&mulch(&["report", "--runs", "runs", "--out", "curves.csv"], d)), 0);
    let mut r = csv::Reader::from_path(d.join("curves.csv")).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["budget", "random", "bo"]);
    let rows: Vec<Vec<String>> = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    assert_eq!(rows.len(), 10);
    for col in 1..=2 {
        let vals: Vec<f64> = rows.iter().map(|row| row[col].parse().unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] >= w[0]), "{vals:?}");
    }
}

#[test]
fn fidelity_scores_from_a_sweep_file() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let y0 = [0.5, 0.7, 0.6, 0.9, 0.8];
    let y1 = [0.6, 0.9, 0.5, 0.7, 0.8];
    let mut csv = String::from("config-id,fidelity,metric\n");
    for (i, (a, b)) in y0.iter().zip(&y1).enumerate() {
        csv.push_str(&format!("c{i},0.1,{a}\nc{i},1,{b}\n"));
    }
    fs::write(d.join("sweep.csv"), csv).unwrap();
    let o = mulch(&["fidelity-scores", "--sweep", "sweep.csv", "--out", "scores.csv"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(d.join("scores.csv")).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["fidelity", "correlation", "precision", "recall"]);
    let row: Vec<f64> = r.records().next().unwrap().unwrap().iter().map(|v| v.parse().unwrap()).collect();
    assert_eq!(row[0], 0.1);
    assert!((row[2] - 0.5).abs() < 1e-15 && (row[3] - 0.5).abs() < 1e-15);
}

#[test]
fn fanova_reads_an_evals_file() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(
        d.join("space.json"),
        r#"{"parameters": [
            {"name": "a", "kind": "continuous", "lower": 0, "upper": 1},
            {"name": "b", "kind": "continuous", "lower": 0, "upper": 1}
        ]}"#,
    )
    .unwrap();
    let mut csv = String::from("a,b,metric\n");
    for i in 0..200 {
        let a = (i as f64 * 0.618_034) % 1.0;
        let b = (i as f64 * 0.754_878) % 1.0;
        csv.push_str(&format!("{a},{b},{}\n", 3.0 * a));
    }
    fs::write(d.join("evals.csv"), csv).unwrap();
    let o = mulch(
        &["fanova", "--evals", "evals.csv", "--space", "space.json", "--trees", "16", "--out", "imp.json"],
        d,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(d.join("imp.json")).unwrap()).unwrap();
    assert_eq!(v["ranking"][0], "a");
    assert!(v["scores"][0]["score"].as_f64().unwrap() > 0.9);
}
