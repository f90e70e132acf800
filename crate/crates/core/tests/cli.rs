//! End-to-end runs of the `hqlab` binary: exit codes, echoed config, golden summaries.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_hqlab")).args(args).output().expect("binary runs");
    (out.status.code().expect("exit code"), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("input.toml");
    std::fs::write(&p, text).unwrap();
    p
}

/// Compares against `tests/golden/<name>.json`; `HQLAB_UPDATE_GOLDEN=1` rewrites it.
fn golden(name: &str, actual: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.json"));
    if std::env::var_os("HQLAB_UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, serde_json::to_string_pretty(actual).unwrap() + "\n").unwrap();
    }
    let expected: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(actual, &expected, "summary differs from {}", path.display());
}

#[test]
fn check_cone_classifications() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("strict");
    let (code, _) = run(&["check-cone", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let s = summary(&out);
    assert_eq!(s["results"]["classification"], "strict");
    assert_eq!(s["results"]["min_margin"], 0.5);
    golden("check_cone_uniform", &s);

    let cfg = write_config(tmp.path(), "instance = \"boundary_degenerate\"\n");
    let out = tmp.path().join("boundary");
    let (code, _) = run(&["check-cone", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(summary(&out)["results"]["classification"], "boundary");

    let cfg = write_config(tmp.path(), "chi_scale = 0.4\nc = 1.0\n");
    let out = tmp.path().join("violated");
    let (code, _) = run(&["check-cone", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert_eq!(summary(&out)["status"], "violated");
}

#[test]
fn usage_errors_exit_64() {
    let tmp = tempfile::tempdir().unwrap();
    for text in ["grid_N = 12\n", "m = 2\n", "not_a_key = 1\n", "f = \"1 +\"\n"] {
        let cfg = write_config(tmp.path(), text);
        let out = tmp.path().join("o");
        let (code, _) = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        // an unparsable density is only seen once the command starts
        let expected = if text.starts_with("f =") { 70 } else { 64 };
        assert_eq!(code, expected, "{text}");
    }
    assert_eq!(run(&["solve", "--config", "/nonexistent/cfg.toml"]).0, 64);
    assert_eq!(run(&["frobnicate"]).0, 64);
    assert_eq!(run(&["solve", "--threads", "0"]).0, 64);
}

#[test]
fn solve_uniform_reports_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("solve");
    let (code, stdout) = run(&["solve", "--out", out.to_str().unwrap(), "--threads", "1"]);
    assert_eq!(code, 0, "{stdout}");
    let s = summary(&out);
    assert!((s["results"]["b"].as_f64().unwrap() - 0.96).abs() < 1e-10);
    assert!(s["results"]["residual_sup"].as_f64().unwrap() <= 1e-10);
    assert_eq!(s["threads"], 1);
    for f in ["config.toml", "state.csv", "fields/header.json", "fields/phi.f64"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let echoed = std::fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(echoed.contains("grid_N = 16"));
}

#[test]
fn continue_default_schedule_has_eight_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("path");
    assert_eq!(run(&["continue", "--out", out.to_str().unwrap()]).0, 0);
    let mut rdr = csv::Reader::from_path(out.join("path.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap().get(0), Some("t"));
    assert_eq!(rdr.records().count(), 8);
}

#[test]
fn solver_failure_exits_70_with_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "max_newton = 1\ninstance = \"manufactured\"\ngrid_N = 8\n");
    let out = tmp.path().join("fail");
    let (code, _) = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 70);
    let s = summary(&out);
    assert_eq!(s["status"], "failed");
    assert_eq!(s["failing_stage"], "solve");
}

#[test]
fn selftest_quick_is_golden_and_seed_independent() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    assert_eq!(run(&["selftest", "--quick", "--out", a.to_str().unwrap()]).0, 0);
    let s = summary(&a);
    assert_eq!(s["schema_version"], 1);
    assert_eq!(s["results"]["trials"], 100);
    golden("selftest_quick", &s);

    let b = tmp.path().join("b");
    assert_eq!(run(&["selftest", "--quick", "--seed", "7", "--out", b.to_str().unwrap()]).0, 0);
    let t = summary(&b);
    assert_eq!(t["status"], "ok");
    assert_ne!(t["results"]["suites"], s["results"]["suites"]);
}
