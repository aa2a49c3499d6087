use std::path::Path;
use std::process::{Command, Output};

fn iwes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iwes")).args(args).output().expect("binary runs")
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn synth_blobs(dir: &Path) {
    write(
        &dir.join("synth.json"),
        r#"{"kind": "blobs", "n": 300, "dim": 2, "classes": 3, "spread": 1.0, "separation": 3.0}"#,
    );
    let out = iwes(&[
        "synth",
        "--config",
        dir.join("synth.json").to_str().unwrap(),
        "--out",
        dir.join("data").to_str().unwrap(),
        "--seed",
        "4",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

const RUN_CONFIG: &str = r#"{
  "dataset": {"path": "data/dataset.csv"},
  "selectors": [{"name": "random"}, {"name": "iwes-dis"}, {"name": "badge"}],
  "budget": {"seed_size": 20, "batch_size": 20, "rounds": 2},
  "trainer": {"max_epochs": 30},
  "trials": 3
}"#;

#[test]
fn run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    synth_blobs(dir.path());
    write(&dir.path().join("run.json"), RUN_CONFIG);
    let cfg = dir.path().join("run.json");
    let mut bytes = Vec::new();
    for (name, workers) in [("a", "1"), ("b", "3")] {
        let out_dir = dir.path().join(name);
        let out = iwes(&["run", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--workers", workers, "--seed", "7"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let summary = std::fs::read_to_string(out_dir.join("random/summary.csv")).unwrap();
        assert!(summary.starts_with("round,selected,trial_0,trial_1,trial_2,mean,stderr"));
        bytes.push((
            std::fs::read(out_dir.join("iwes-dis/curve.csv")).unwrap(),
            std::fs::read(out_dir.join("iwes-dis/trace_trial1.jsonl")).unwrap(),
        ));
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn oversized_budget_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    synth_blobs(dir.path());
    write(&dir.path().join("run.json"), &RUN_CONFIG.replace("\"rounds\": 2", "\"rounds\": 50"));
    let out = iwes(&["run", "--config", dir.path().join("run.json").to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds"));
}

#[test]
fn malformed_dataset_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(dir.path().join("data")).unwrap();
    write(&dir.path().join("data/dataset.csv"), "f0,f1,label\n0.1,0.2,0\n0.3,oops,1\n");
    write(&dir.path().join("run.json"), RUN_CONFIG);
    let out = iwes(&["run", "--config", dir.path().join("run.json").to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":3:"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn exhausted_trials_fail_aggregation() {
    let dir = tempfile::tempdir().unwrap();
    synth_blobs(dir.path());
    let cfg = r#"{
      "dataset": {"path": "data/dataset.csv"},
      "selectors": [{"name": "iwes-ent", "max_passes": 1}],
      "budget": {"seed_size": 20, "batch_size": 200, "rounds": 1},
      "trials": 3
    }"#;
    write(&dir.path().join("run.json"), cfg);
    let out = iwes(&["run", "--config", dir.path().join("run.json").to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("o/report.json").exists());
}

#[test]
fn theory_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    write(
        &dir.path().join("theory.json"),
        r#"{"instance": {"kind": "thresholds-1d", "grid": 40, "noise": 0.0}, "horizon": 300, "trials": 10}"#,
    );
    let out = iwes(&["theory", "--config", dir.path().join("theory.json").to_str().unwrap(), "--out", dir.path().join("t").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("t/theory_report.json")).unwrap()).unwrap();
    assert_eq!(report["l_star"], 0.0);
    assert_eq!(report["retention"]["passes"], true);
}

#[test]
fn theory_reads_synthesized_distribution() {
    let dir = tempfile::tempdir().unwrap();
    write(&dir.path().join("synth.json"), r#"{"kind": "thresholds-1d", "n": 50}"#);
    let out = iwes(&["synth", "--config", dir.path().join("synth.json").to_str().unwrap(), "--out", dir.path().join("d").to_str().unwrap()]);
    assert!(out.status.success());
    write(
        &dir.path().join("theory.json"),
        r#"{"instance": {"kind": "distribution", "path": "d/distribution.json"}, "horizon": 100, "trials": 4}"#,
    );
    let out = iwes(&["theory", "--config", dir.path().join("theory.json").to_str().unwrap(), "--out", dir.path().join("t").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("coefficient inequality"));
}

#[test]
fn verify_runs_selected_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let out = iwes(&["verify", "--criteria", "1,5", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("[PASS]")).count(), 2);
    assert!(dir.path().join("acceptance.json").exists());
}

#[test]
fn unknown_criterion_fails_verification() {
    let out = iwes(&["verify", "--criteria", "42"]);
    assert_eq!(out.status.code(), Some(3));
}
