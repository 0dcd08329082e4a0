use std::path::Path;
use std::process::{Command, Output};

fn ncs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncs-aloha")).args(args).output().expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn small_sweep(out: &Path, extra: &[&str]) -> Output {
    let out = out.to_str().unwrap();
    let mut args = vec!["simulate", "--config", "fig2", "--set", "num_realizations=200", "--set", "q_sweep=[0.2, 0.6]", "--out", out];
    args.extend_from_slice(extra);
    ncs(&args)
}

#[test]
fn selftest_passes() {
    let out = ncs(&["selftest"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert!(text.lines().any(|l| l.starts_with("PASS")));
    assert!(!text.lines().any(|l| l.starts_with("FAIL")));
}

#[test]
fn simulate_writes_sweep_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_sweep(dir.path(), &["--seed", "7"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(csv.starts_with("protocol,system,q,estimate,ci95,analytic"));
    // Two protocols, two systems, two access probabilities.
    assert_eq!(csv.lines().count(), 1 + 8);
    let manifest = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 7"), "{manifest}");
}

#[test]
fn refuses_to_overwrite_without_flag() {
    let dir = tempfile::tempdir().unwrap();
    assert!(small_sweep(dir.path(), &[]).status.success());
    let before = std::fs::read(dir.path().join("sweep.csv")).unwrap();
    let again = small_sweep(dir.path(), &["--seed", "99"]);
    assert_eq!(again.status.code(), Some(2));
    assert!(stderr(&again).contains("already exists"), "{}", stderr(&again));
    assert_eq!(std::fs::read(dir.path().join("sweep.csv")).unwrap(), before);
    let forced = small_sweep(dir.path(), &["--seed", "99", "--overwrite"]);
    assert!(forced.status.success(), "{}", stderr(&forced));
    assert_ne!(std::fs::read(dir.path().join("sweep.csv")).unwrap(), before);
}

#[test]
fn invalid_access_probability_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_sweep(dir.path(), &["--set", "q_sweep=[1.5]"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("q_sweep"), "{}", stderr(&out));
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_sweep(dir.path(), &["--set", "bogus=1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bogus"), "{}", stderr(&out));
}

#[test]
fn missing_config_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = ncs(&["analytic", "--config", "no/such/file.conf", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("cannot access"), "{}", stderr(&out));
}
