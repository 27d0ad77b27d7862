use std::fs;
use std::process::Command;

fn relayfair() -> Command {
    Command::new(env!("CARGO_BIN_EXE_relayfair"))
}

#[test]
fn small_run_succeeds_and_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    fs::write(&cfg, "[system]\nk = 2\nn = 2\np_s_max = 18 dBm\n[run]\nschemes = Alg1, EBT\ntrials = 2\n").unwrap();
    let out = dir.path().join("out");
    let status = relayfair()
        .args(["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--emit", "all", "--seed", "3"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let table = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    assert!(out.join("cdf_Alg1.csv").exists());
}

#[test]
fn bad_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "[system]\nk = two\n").unwrap();
    let out = relayfair().args(["--config", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let out = relayfair().args(["--schemes", "Alg1,Greedy", "--trials", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn infeasible_runs_exit_with_two() {
    // With no reference gain the harvester never turns on, so every run fails.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("dark.cfg");
    fs::write(&cfg, "[system]\nk = 1\nn = 1\np_s_max = 0 dBm\n[geometry]\nref_gain_db = 0\n[run]\nschemes = Alg1\ntrials = 2\n").unwrap();
    let out = dir.path().join("out");
    let res = relayfair().args(["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
    let table = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
}
