use std::path::{Path, PathBuf};
use std::process::Command;

use rcirl_cli::{sha256_hex, RunManifest};

fn rcirl(dir: &Path, args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_rcirl"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn ok(dir: &Path, args: &[&str]) {
    let (code, _, err) = rcirl(dir, args);
    assert_eq!(code, 0, "{args:?}: {err}");
}

fn manifest(path: PathBuf) -> RunManifest {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

/// A 10-scenario suite and its frames in a fresh directory.
fn small_pipeline() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["suite", "--size", "10", "--seed", "4", "--out", "suite.json"]);
    ok(d, &["frames", "--suite", "suite.json", "--out", "frames.jsonl", "--seed", "4", "--n-samples", "20", "--n-holdout", "3"]);
    dir
}

#[test]
fn version_and_help_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = rcirl(dir.path(), &["version"]);
    assert_eq!(code, 0);
    assert!(out.contains("model format 1"));
    assert!(out.contains("manifest format 1"));
    let (code, out, _) = rcirl(dir.path(), &["train", "--help"]);
    assert_eq!(code, 0);
    for flag in ["--frames", "--method", "--seed", "--learning-rate"] {
        assert!(out.contains(flag), "help is missing {flag}");
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(rcirl(dir.path(), &["bogus"]).0, 1);
    assert_eq!(rcirl(dir.path(), &["train", "--out", "m.json"]).0, 1);
    assert_eq!(rcirl(dir.path(), &["train", "--frames", "f", "--out", "m", "--method", "svm"]).0, 1);
    assert_eq!(rcirl(dir.path(), &["suite", "--out", "s.json", "--size", "5", "--per-family", "1"]).0, 1);
}

#[test]
fn malformed_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.json"), "[{\"id\": 3").unwrap();
    assert_eq!(rcirl(d, &["frames", "--suite", "bad.json", "--out", "f.jsonl"]).0, 2);
    assert_eq!(rcirl(d, &["frames", "--suite", "missing.json", "--out", "f.jsonl"]).0, 2);
    std::fs::write(d.join("bad.jsonl"), "{}\n").unwrap();
    assert_eq!(rcirl(d, &["train", "--frames", "bad.jsonl", "--out", "m.json"]).0, 2);
}

#[test]
fn grid_mismatch_exits_three() {
    let dir = small_pipeline();
    let d = dir.path();
    ok(d, &["train", "--frames", "frames.jsonl", "--out", "model.json", "--epochs", "1"]);
    let mut model: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("model.json")).unwrap()).unwrap();
    for t in model["time_grid"].as_array_mut().unwrap() {
        *t = serde_json::json!(t.as_f64().unwrap() * 0.5);
    }
    std::fs::write(d.join("halved.json"), serde_json::to_vec(&model).unwrap()).unwrap();
    let (code, _, err) = rcirl(d, &["eval", "--model", "halved.json", "--suite", "suite.json", "--out", "r"]);
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("contract violation"));
}

#[test]
fn diverging_training_exits_four() {
    let dir = small_pipeline();
    let d = dir.path();
    std::fs::write(d.join("train.json"), r#"{"optimizer": "sgd", "learning_rate": 1e300, "epochs": 3}"#).unwrap();
    let (code, _, err) = rcirl(d, &["train", "--frames", "frames.jsonl", "--out", "m.json", "--config", "train.json"]);
    assert_eq!(code, 4, "{err}");
    assert!(!d.join("m.json").exists());
}

#[test]
fn training_twice_gives_identical_models_and_manifests() {
    let dir = small_pipeline();
    let d = dir.path();
    for m in ["a.json", "b.json"] {
        ok(d, &["train", "--frames", "frames.jsonl", "--out", m, "--epochs", "2", "--seed", "9"]);
    }
    let read = |p: &str| std::fs::read(d.join(p)).unwrap();
    assert_eq!(read("a.json"), read("b.json"));
    let (ma, mb) = (manifest(d.join("a.json.manifest.json")), manifest(d.join("b.json.manifest.json")));
    assert_eq!(ma.config, mb.config);
    assert_eq!(ma.inputs, mb.inputs);
    assert_eq!(ma.seed, 9);
    ok(d, &["train", "--frames", "frames.jsonl", "--out", "c.json", "--epochs", "2", "--seed", "10"]);
    assert_ne!(read("a.json"), read("c.json"));
}

#[test]
fn manifests_digest_their_inputs_and_inputs_stay_untouched() {
    let dir = small_pipeline();
    let d = dir.path();
    let suite_before = std::fs::read(d.join("suite.json")).unwrap();
    let frames_before = std::fs::read(d.join("frames.jsonl")).unwrap();
    ok(d, &["train", "--frames", "frames.jsonl", "--out", "m.json", "--epochs", "1"]);
    ok(d, &["eval", "--model", "m.json", "--suite", "suite.json", "--frames", "frames.jsonl", "--out", "report"]);
    assert_eq!(std::fs::read(d.join("suite.json")).unwrap(), suite_before);
    assert_eq!(std::fs::read(d.join("frames.jsonl")).unwrap(), frames_before);

    let m = manifest(d.join("report.manifest.json"));
    assert_eq!(m.command, "eval");
    assert_eq!(m.outputs, ["report.csv", "report.json"]);
    for input in &m.inputs {
        assert_eq!(input.sha256, sha256_hex(&std::fs::read(d.join(&input.path)).unwrap()));
    }
    let csv = std::fs::read_to_string(d.join("report.csv")).unwrap();
    assert!(csv.starts_with("metric,value,numerator,denominator\ncollision_free,"));
    assert!(csv.contains("expert_top_decile_rate,"));
    for name in ["suite.json", "frames.jsonl", "m.json"] {
        assert!(d.join(format!("{name}.manifest.json")).exists(), "{name}");
    }
}

#[test]
fn writing_over_an_input_is_refused() {
    let dir = small_pipeline();
    let d = dir.path();
    let before = std::fs::read(d.join("frames.jsonl")).unwrap();
    let (code, _, _) = rcirl(d, &["train", "--frames", "frames.jsonl", "--out", "frames.jsonl"]);
    assert_eq!(code, 1);
    assert_eq!(std::fs::read(d.join("frames.jsonl")).unwrap(), before);
}

#[test]
fn compare_and_shiftdemo_layouts() {
    let dir = small_pipeline();
    let d = dir.path();
    ok(d, &["train", "--frames", "frames.jsonl", "--out", "rc.json", "--epochs", "1"]);
    ok(d, &["train", "--frames", "frames.jsonl", "--out", "gan.json", "--epochs", "1", "--method", "gan"]);
    ok(d, &["compare", "--model-a", "rc.json", "--model-b", "gan.json", "--suite", "suite.json", "--out", "cmp.csv"]);
    let cmp = std::fs::read_to_string(d.join("cmp.csv")).unwrap();
    assert!(cmp.starts_with("metric,rc,gan\n"));
    assert_eq!(cmp.lines().count(), 7);
    assert_eq!(rcirl(d, &["compare", "--model-a", "rc.json", "--model-b", "rc.json", "--suite", "suite.json", "--out", "x.csv"]).0, 1);

    ok(d, &["shiftdemo", "--out", "shift"]);
    let points = std::fs::read_to_string(d.join("shift.points.csv")).unwrap();
    assert!(points.starts_with("frame_id,x,y,is_demo\n"));
    assert_eq!(points.lines().count(), 203);
    let dirs = std::fs::read_to_string(d.join("shift.directions.csv")).unwrap();
    assert!(dirs.starts_with("name,dx,dy,margin\n"));
}
