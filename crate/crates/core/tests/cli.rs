use std::path::Path;
use std::process::{Command, Output};

use pinnscape::io;

const BIN: &str = env!("CARGO_BIN_EXE_pinnscape");

const TINY: &str = r#"{"problem": "elliptic1d", "objective": "drm", "network": {"width": 4},
    "optimizer": {"kind": "adam", "learning_rate": 0.01, "epochs": 40}}"#;

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn train_writes_a_versioned_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", TINY);
    let out = dir.path().join("runs");
    let o = run(&["train", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run_dir = out.join("train-drm1d-s5");
    assert_eq!(String::from_utf8(o.stdout).unwrap().trim(), run_dir.to_str().unwrap());

    let manifest: serde_json::Value = io::read_json(&run_dir.join("manifest.json")).unwrap();
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["subcommand"], "train");
    assert_eq!(manifest["seed"], 5);
    for f in manifest["files"].as_array().unwrap() {
        assert!(run_dir.join(f.as_str().unwrap()).exists(), "{f}");
    }
    let (header, rows) = io::read_csv(&run_dir.join("losses.csv")).unwrap();
    assert_eq!(header, ["epoch", "loss", "radius"]);
    assert_eq!(rows.len(), 41);
    let (spec, params) = io::read_params(&run_dir.join("final_params.bin")).unwrap();
    assert_eq!(params.len(), spec.param_count());
    assert!(!out.join(".train-drm1d-s5.partial").exists());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", TINY);
    let read = |root: &Path| {
        let d = root.join("plane-scan-drm1d-s0");
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&d)
            .unwrap()
            .map(|e| e.unwrap())
            .filter(|e| e.file_name() != "timing.json")
            .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()))
            .collect();
        files.sort();
        files
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&["plane-scan", "--config", &cfg, "--out", a.to_str().unwrap()]).status.success());
    assert!(run(&["plane-scan", "--config", &cfg, "--out", b.to_str().unwrap(), "--threads", "2"]).status.success());
    assert_eq!(read(&a), read(&b));
}

#[test]
fn problem_flags_replace_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["train", "--problem", "elliptic1d", "--objective", "drm", "--out", dir.path().to_str().unwrap(), "--id", "flags"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value = io::read_json(&dir.path().join("flags/manifest.json")).unwrap();
    assert_eq!(manifest["param_count"], 480);
    assert_eq!(manifest["config"]["optimizer"]["epochs"], 7500);
}

#[test]
fn usage_and_config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["train"]).status.code(), Some(2));
    assert_eq!(run(&["landscape"]).status.code(), Some(2));
    let bad = write_config(dir.path(), "bad.json", r#"{"problem": "elliptic1d", "objective": "drm", "optimiser": {}}"#);
    assert_eq!(run(&["train", "--config", &bad]).status.code(), Some(2));
    let old = write_config(dir.path(), "old.json", r#"{"schema_version": 99, "problem": "elliptic1d", "objective": "drm"}"#);
    let o = run(&["train", "--config", &old]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema_version"));
    assert_eq!(run(&["train", "--config", "/nonexistent/c.json"]).status.code(), Some(1));
}

#[test]
fn non_finite_training_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "inv.json",
        r#"{"problem": "neohookean2d", "objective": "drm", "network": {"width": 4}, "quadrature": {"radial": 4, "angular": 8},
            "init_scale": 50.0, "optimizer": {"kind": "adam", "learning_rate": 0.01, "epochs": 5}}"#,
    );
    let out = dir.path().join("runs");
    let o = run(&["train", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.join("train-drm2d-s0").exists());
}

#[test]
fn probe_failure_exits_with_4_and_keeps_partial_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", TINY);
    let out = dir.path().join("runs");
    let o = run(&["gram", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    let d = out.join("gram-drm1d-s0");
    assert!(d.join("manifest.json").exists());
    assert!(d.join("basis.bin").exists());
}
