//! The `bench` binary end to end: exit codes and the CSV it writes.

use std::process::Command;

use lmbm_bench::{read_csv, CSV_HEADER};

fn bench() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bench"))
}

#[test]
fn small_grid_writes_one_row_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rows.csv");
    let status = bench()
        .args([
            "run",
            "--problems",
            "f1,f6",
            "--dims",
            "2",
            "--noise",
            "N0,N3",
            "--qbar",
            "0.01",
        ])
        .args(["--repeats", "2", "--jobs", "1", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    let rows = read_csv(text.as_bytes()).unwrap();
    // one exact run and two seeded noisy runs per problem
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| !r.is_error()));
    assert_eq!(
        rows.iter()
            .filter(|r| r.noise == "N3")
            .map(|r| r.seed)
            .collect::<Vec<_>>(),
        [42, 43, 42, 43]
    );
}

#[test]
fn failed_runs_set_the_exit_code() {
    // f1 needs n >= 2
    let args = ["run", "--problems", "f1", "--dims", "1", "--noise", "N0"];
    assert_eq!(bench().args(args).output().unwrap().status.code(), Some(1));
    assert_eq!(
        bench().args(args).arg("--keep-going").output().unwrap().status.code(),
        Some(0)
    );
}

#[test]
fn bad_arguments_are_usage_errors() {
    let out = bench().args(["run", "--problems", "f11"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--problems"));
}
