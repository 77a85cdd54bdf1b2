use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn riskbudget(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riskbudget"))
        .args(args)
        .arg("--out")
        .arg(out)
        .arg("--no-timing")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

/// Runs the command twice into fresh directories and checks every written file matches byte for byte.
fn assert_reproducible(args: &[&str], files: &[&str]) {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for dir in [&a, &b] {
        let out = riskbudget(args, dir.path());
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for f in files {
        let first = fs::read(a.path().join(f)).unwrap_or_else(|e| panic!("{f}: {e}"));
        let second = fs::read(b.path().join(f)).unwrap();
        assert!(!first.is_empty(), "{f} is empty");
        assert!(first == second, "{f} differs between runs");
    }
}

#[test]
fn reference_is_reproducible() {
    assert_reproducible(
        &["reference", "--model", "bundled:tmix_4assets"],
        &["reference.json"],
    );
}

#[test]
fn solve_is_reproducible() {
    assert_reproducible(
        &[
            "solve",
            "--model",
            "bundled:gmix_3assets_p1",
            "--n",
            "20000",
            "--measure",
            "mad",
            "--seed",
            "3",
        ],
        &["solve.json", "solve.csv"],
    );
    assert_reproducible(
        &[
            "solve",
            "--model",
            "bundled:gmix_3assets_p1",
            "--n",
            "5000",
            "--method",
            "osbgd",
        ],
        &["solve.json", "solve.csv"],
    );
}

#[test]
fn trace_is_reproducible() {
    let cfg_dir = TempDir::new().unwrap();
    let cfg = write(
        cfg_dir.path(),
        "cfg.json",
        r#"{"epochs": 2, "batch_size": 500}"#,
    );
    assert_reproducible(
        &[
            "trace",
            "--model",
            "bundled:tmix_4assets",
            "--n",
            "5000",
            "--config",
            &cfg,
        ],
        &["trace.csv", "trace_report.json"],
    );
    let out = TempDir::new().unwrap();
    riskbudget(
        &[
            "trace",
            "--model",
            "bundled:tmix_4assets",
            "--n",
            "5000",
            "--config",
            &cfg,
        ],
        out.path(),
    );
    let text = fs::read_to_string(out.path().join("trace.csv")).unwrap();
    // header plus start plus 2 epochs of 10 batches
    assert_eq!(text.lines().count(), 1 + 1 + 20);
}

#[test]
fn compare_is_reproducible() {
    assert_reproducible(
        &[
            "compare",
            "--model",
            "bundled:gmix_3assets_p08",
            "--n",
            "20000",
            "--measure",
            "vol",
            "--measure",
            "es:0.95",
            "--measure",
            "spectral-mean:0.05",
        ],
        &["compare.csv"],
    );
}

#[test]
fn study_is_reproducible() {
    let cfg_dir = TempDir::new().unwrap();
    let cfg = write(
        cfg_dir.path(),
        "study.json",
        r#"{"dims": [3], "repetitions": 2, "hist_size": 400, "sim_size": 5000, "model_free_epochs": 5,
            "estimation": ["true_params", "gmix_em"], "seed": 5}"#,
    );
    assert_reproducible(
        &["study", "--config", &cfg, "--jobs", "2"],
        &["study.csv", "study_runs.csv"],
    );
}

#[test]
fn sample_and_fit_are_reproducible() {
    let args = [
        "sample",
        "--model",
        "bundled:gmix_3assets_p08",
        "--n",
        "2000",
        "--seed",
        "9",
    ];
    assert_reproducible(&args, &["sample.csv"]);
    let data = TempDir::new().unwrap();
    let out = riskbudget(&args, data.path());
    assert!(out.status.success());
    let sample = data.path().join("sample.csv");
    let sample = sample.to_str().unwrap();
    assert_reproducible(
        &["fit", "--sample", sample, "--header", "--family", "gmix"],
        &["fit.json"],
    );
    assert_reproducible(
        &["fit", "--sample", sample, "--header", "--seed", "2"],
        &["fit.json"],
    );
}

#[test]
fn malformed_input_exits_with_one() {
    let dir = TempDir::new().unwrap();
    let bad = write(dir.path(), "bad.json", "{\"epochs\": ");
    let out = riskbudget(
        &["solve", "--model", "bundled:tmix_4assets", "--config", &bad],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());

    let missing = dir.path().join("nope.json");
    let out = riskbudget(
        &["reference", "--model", missing.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));

    let out = riskbudget(
        &[
            "solve",
            "--model",
            "bundled:tmix_4assets",
            "--measure",
            "es:1.5",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));

    let out = riskbudget(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn numerical_failure_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"step_schedule": {"kind": "constant", "base": 1e6}}"#,
    );
    for n in ["20000", "100000"] {
        let out = riskbudget(
            &[
                "solve",
                "--model",
                "bundled:tmix_4assets",
                "--n",
                n,
                "--config",
                &cfg,
            ],
            dir.path(),
        );
        assert_eq!(
            out.status.code(),
            Some(2),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}
