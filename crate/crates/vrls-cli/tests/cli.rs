//! End-to-end checks of the command-line interface through the real binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn vrls() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vrls"))
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("vrls_cli_{name}_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

#[test]
fn unknown_scheduler_exits_with_config_error() {
    let out = run(vrls()
        .args(["eval", "--scenario", "scd_i", "--scheduler", "bogus"])
        .arg("--out")
        .arg(tmp_dir("unknown_sched")));
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("random"), "lists valid names: {stderr}");
}

#[test]
fn unknown_scenario_exits_with_config_error() {
    let out = run(vrls().args([
        "eval",
        "--scenario",
        "not_a_scenario",
        "--scheduler",
        "random",
    ]));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn vrls_scheduler_without_checkpoint_is_rejected() {
    let out = run(vrls()
        .args(["eval", "--scenario", "scd_i", "--scheduler", "vrls"])
        .arg("--out")
        .arg(tmp_dir("no_ck")));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn eval_writes_windows_and_summary() {
    let dir = tmp_dir("eval_ok");
    let out = run(vrls()
        .args([
            "eval",
            "--scenario",
            "scd_ii",
            "--scheduler",
            "random",
            "--duration",
            "30",
            "--min-actions",
            "3",
            "--settle",
            "0",
            "--seed",
            "9",
        ])
        .arg("--out")
        .arg(&dir));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let windows = std::fs::read_to_string(dir.join("windows.csv")).unwrap();
    assert!(windows.starts_with("window_index,"));
    let summary = std::fs::read_to_string(dir.join("summary.txt")).unwrap();
    assert!(summary.contains("scheduler: random"));
}

#[test]
fn train_zero_epochs_writes_a_loadable_checkpoint() {
    let dir = tmp_dir("train0");
    let out = run(vrls()
        .args([
            "train",
            "--scenario",
            "scd_ii",
            "--epochs",
            "0",
            "--workers",
            "1",
            "--sync",
            "--seed",
            "4",
        ])
        .arg("--out")
        .arg(&dir));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let ck = nnkit::Checkpoint::load(&dir.join("checkpoint.bin")).unwrap();
    assert_eq!(ck.arch.n_actions, 20);
    assert_eq!(ck.epoch, 0);
    let curve = std::fs::read_to_string(dir.join("curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 1, "header only for zero epochs");
}

#[test]
fn retrain_on_mismatched_pool_fails_with_config_error() {
    let dir = tmp_dir("mismatch");
    run(vrls()
        .args([
            "train", "--scenario", "scd_ii", "--epochs", "0", "--workers", "1", "--sync",
        ])
        .arg("--out")
        .arg(&dir));
    // scd_ii checkpoints cover 20 TBs; shrink the pool via an env override
    let out = run(vrls()
        .args([
            "train", "--scenario", "scd_i", "--epochs", "0", "--workers", "1", "--sync",
        ])
        .arg("--init-checkpoint")
        .arg(dir.join("checkpoint.bin"))
        .arg("--out")
        .arg(&dir)
        .env("VRLS_SCENARIO__POOL__N_SUBFRAMES", "4"));
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn scenario_file_paths_are_accepted() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/scd_iii.toml");
    let dir = tmp_dir("file_scenario");
    let out = run(vrls()
        .args(["eval", "--scheduler", "random", "--duration", "20"])
        .arg("--scenario")
        .arg(&path)
        .args(["--min-actions", "1", "--settle", "0", "--seed", "1"])
        .arg("--out")
        .arg(&dir));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(dir.join("summary.txt")).unwrap();
    assert!(summary.contains("scenario: scd_iii"));
}

#[test]
fn compare_emits_rows_per_scheduler_and_seed() {
    let dir = tmp_dir("compare");
    let out = run(vrls()
        .args([
            "compare",
            "--scenario",
            "scd_i",
            "--schedulers",
            "random,oracle",
            "--seeds",
            "1,2",
            "--duration",
            "30",
            "--min-actions",
            "2",
            "--settle",
            "0",
        ])
        .arg("--out")
        .arg(&dir));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("compare.csv")).unwrap();
    for needle in ["random,1,", "random,2,", "oracle,1,", "oracle,2,"] {
        assert!(csv.contains(needle), "missing {needle}");
    }
    let summary = std::fs::read_to_string(dir.join("summary.txt")).unwrap();
    assert!(summary.contains("scheduler random:"));
    assert!(summary.contains("scheduler oracle:"));
}

#[test]
fn compare_reports_partial_failures_but_still_emits_others() {
    let dir = tmp_dir("partial");
    let out = run(vrls()
        .args([
            "compare",
            "--scenario",
            "mcd_nofade",
            "--schedulers",
            "random,oracle", // oracle refuses non-SCD channels
            "--seeds",
            "1",
            "--duration",
            "20",
            "--min-actions",
            "1",
            "--settle",
            "0",
        ])
        .arg("--out")
        .arg(&dir));
    assert_eq!(out.status.code(), Some(1));
    let summary = std::fs::read_to_string(dir.join("summary.txt")).unwrap();
    assert!(summary.contains("scheduler random:"));
    assert!(summary.contains("FAILED"));
    let csv = std::fs::read_to_string(dir.join("compare.csv")).unwrap();
    assert!(csv.contains("random,1,"));
}

#[test]
fn env_overrides_change_the_scenario() {
    let dir = tmp_dir("env_override");
    let out = run(vrls()
        .args([
            "eval",
            "--scenario",
            "scd_i",
            "--scheduler",
            "random",
            "--duration",
            "20",
            "--min-actions",
            "1",
            "--settle",
            "0",
        ])
        .arg("--out")
        .arg(&dir)
        .env("VRLS_SCENARIO__PRR_WINDOW_S", "5.0"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let windows = std::fs::read_to_string(dir.join("windows.csv")).unwrap();
    let second_line = windows.lines().nth(1).unwrap();
    assert!(second_line.contains(",5000,"), "5 s windows: {second_line}");
}

#[test]
fn unknown_env_override_key_fails_closed() {
    let out = run(vrls()
        .args(["eval", "--scenario", "scd_i", "--scheduler", "random"])
        .env("VRLS_SCENARIO__TYPO_KEY", "3"));
    assert_eq!(out.status.code(), Some(1));
}
