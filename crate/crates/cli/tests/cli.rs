use std::path::Path;
use std::process::{Command, Output};

use ris_sense_dataset::DatasetManifest;

fn ris_sense(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ris-sense")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

#[test]
fn help_lists_subcommands_and_exits_zero() {
    let o = ris_sense(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for sub in ["simulate", "dataset", "train", "eval", "grid", "gradcheck"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
    assert_eq!(ris_sense(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(ris_sense(&["simulate", "--bogus"]).status.code(), Some(1));
    assert_eq!(ris_sense(&["simulate", "--env", "kitchen", "--out", "/tmp/x"]).status.code(), Some(1));
    assert_eq!(ris_sense(&["gradcheck", "--module", "lstm"]).status.code(), Some(1));
    assert_eq!(ris_sense(&[]).status.code(), Some(1));
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_ris-sense"))
        .args(["gradcheck", "--module", "relu"])
        .env("RIS_SENSE_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("RIS_SENSE_THREADS"));
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let o = ris_sense(&["dataset", "build", "--recipe", "measured", "--env", "chamber", "--campaign", path(&missing), "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn gradcheck_single_module() {
    let o = ris_sense(&["gradcheck", "--module", "softmax"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("softmax") && text.contains("ok"), "{text}");
}

#[test]
fn simulate_then_build_measured_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let campaign = dir.path().join("campaign");
    let data = dir.path().join("data");
    let o = ris_sense(&["simulate", "--env", "meeting", "--out", path(&campaign), "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("seed: 7"));
    assert!(stdout(&o).contains("216 sweeps"));

    let o = ris_sense(&["dataset", "build", "--recipe", "measured", "--env", "meeting", "--campaign", path(&campaign), "--out", path(&data)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("seed: 2024"), "default seed is printed");
    let m = DatasetManifest::load(&data.join("manifest.json")).unwrap();
    assert_eq!(m.entries.len(), 72);
    assert!(m.entries.iter().all(|e| DatasetManifest::resolve(&data.join("manifest.json"), e).exists()));

    // the campaign holds meeting data, so asking for another environment is refused
    let o = ris_sense(&["dataset", "build", "--recipe", "measured", "--env", "hflab", "--campaign", path(&campaign), "--out", path(&data)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_with_coarse_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = ris_sense(&["simulate", "--env", "chamber", "--out", path(dir.path()), "--angle-step", "90", "--points", "101", "--csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("12 sweeps"));
    let csvs = std::fs::read_dir(dir.path()).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv")).count();
    assert_eq!(csvs, 12);
}

#[test]
fn train_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let campaign = dir.path().join("campaign");
    let data = dir.path().join("data");
    let model = dir.path().join("m.ccnn");
    let report = dir.path().join("report.json");
    let manifest = data.join("manifest.json");
    assert!(ris_sense(&["simulate", "--env", "chamber", "--out", path(&campaign)]).status.success());
    assert!(ris_sense(&["dataset", "build", "--recipe", "measured", "--env", "chamber", "--campaign", path(&campaign), "--out", path(&data)])
        .status
        .success());
    let o = ris_sense(&["train", "--manifest", path(&manifest), "--out", path(&model), "--epochs", "1", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("seed: 3") && text.contains("epoch   1"), "{text}");
    let trained_line = text.lines().find(|l| l.starts_with("test accuracy")).unwrap().to_string();

    let o = ris_sense(&["eval", "--model", path(&model), "--manifest", path(&manifest), "--json", path(&report)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["test_n"], 15);
    // the f32 checkpoint reproduces the in-memory model's test accuracy
    let acc = json["accuracy"].as_f64().unwrap();
    assert!(trained_line.contains(&format!("{acc:.4}")), "{trained_line} vs {acc}");
}
