//! The `tabletop` binary end to end on a small selection.

use std::process::Command;

fn tabletop(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_tabletop")).args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn suite_then_report_agree() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let suite = tabletop(&["suite", "--only", "stg", "--trials", "1", "--out", out]);
    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3, "{csv}");
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",1,1,1,1,1")), "{csv}");

    let again = dir.path().join("again");
    let report = tabletop(&["report", out, "--out", again.to_str().unwrap()]);
    let rescored = std::fs::read_to_string(again.join("affordance/results.md")).unwrap();
    assert_eq!(rescored, std::fs::read_to_string(dir.path().join("results.md")).unwrap());
    assert!(report.contains(suite.trim()));
}

#[test]
fn run_prints_the_score() {
    let out = tabletop(&["run", "--task", "stt-flatten"]);
    assert!(out.contains("outcome: Completed"), "{out}");
    assert!(out.trim_end().ends_with("score: 100"));
}

#[test]
fn unknown_task_fails() {
    let out = Command::new(env!("CARGO_BIN_EXE_tabletop"))
        .args(["run", "--task", "nope"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown task nope"));
}
