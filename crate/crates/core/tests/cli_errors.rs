//! Exit codes and error lines of the command-line binary.

use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_decompound"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn stderr_line(out: &Output) -> String {
    let text = String::from_utf8_lossy(&out.stderr).into_owned();
    assert_eq!(text.trim_end().lines().count(), 1, "stderr: {text}");
    text.trim_end().to_owned()
}

const VALID: &str = r#"
[model]
lambda = 1.0
delta = 1.0
jump = { family = "gaussian", mean = 0.0, sd = 1.0 }

[experiment]
n = 300
"#;

#[test]
fn missing_lambda_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &VALID.replace("lambda = 1.0\n", ""), &["simulate"]);
    assert!(!out.status.success());
    let line = stderr_line(&out);
    assert!(line.starts_with("error[config]:"), "{line}");
    assert!(line.contains("model.lambda: required field missing"), "{line}");
}

#[test]
fn malformed_toml_reports_a_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "[model]\nlambda = = 1\n", &["simulate"]);
    assert!(!out.status.success());
    let line = stderr_line(&out);
    assert!(line.starts_with("error[config]:"), "{line}");
    assert!(line.contains("line 2"), "{line}");
}

#[test]
fn negative_intensity_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &VALID.replace("lambda = 1.0", "lambda = -1.0"), &["simulate"]);
    assert!(!out.status.success());
    let line = stderr_line(&out);
    assert!(line.starts_with("error[config]:"), "{line}");
    assert!(line.contains("lambda must be > 0"), "{line}");
}

#[test]
fn simulate_then_estimate_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let sim = run(dir.path(), VALID, &["simulate"]);
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    let input = dir.path().join("out").join("increments.csv");
    let est = run(dir.path(), VALID, &["estimate", "--input", input.to_str().unwrap()]);
    assert!(est.status.success(), "{}", String::from_utf8_lossy(&est.stderr));
    assert!(dir.path().join("out").join("estimate.csv").exists());
}
