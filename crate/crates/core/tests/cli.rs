use difflab::harness::io::read_observations;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn difflab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_difflab")).args(args).output().unwrap()
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn ratecalc_prints_the_thresholds() {
    let o = difflab(&["ratecalc", "--d", "1", "--a", "0.6", "--s", "7"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("alpha_d = 4"), "{s}");
    assert!(s.contains("s* = 7"), "{s}");
    assert!(s.contains("boundary case"), "{s}");
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(difflab(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(difflab(&["ratecalc", "--d", "1", "--a", "0.3", "--s", "7"]).status.code(), Some(2));
    assert_eq!(difflab(&["rate-study"]).status.code(), Some(2));
    let o = difflab(&["--config", "/nonexistent/config.json", "simulate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot read"));
}

#[test]
fn simulate_then_estimate_from_the_written_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = config("simulate.toml");
    let cfg = cfg.to_str().unwrap();
    let o = difflab(&["--config", cfg, "--out", out, "simulate"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = dir.path().join("observations.csv");
    let obs = read_observations(&csv).unwrap();
    assert_eq!((obs.n(), obs.dim, obs.seed), (4096, 1, difflab::rng::cell_seed(7, &[4096])));
    assert!(obs.truth_id.as_deref().unwrap().contains("bumps"));

    let again = tempfile::tempdir().unwrap();
    difflab(&["--config", cfg, "--out", again.path().to_str().unwrap(), "simulate"]);
    assert_eq!(std::fs::read(&csv).unwrap(), std::fs::read(again.path().join("observations.csv")).unwrap());

    let o = difflab(&["--config", cfg, "--out", out, "estimate", "--input", csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("rank"));
    let field = std::fs::read_to_string(dir.path().join("field.csv")).unwrap();
    assert_eq!(field.lines().count(), 258);
    assert!(dir.path().join("coefficients.csv").exists());
}

#[test]
fn estimate_rejects_a_dimension_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("obs.csv");
    std::fs::write(&csv, "i,t,x1,x2\n0,0,0.5,0.5\n1,0.01,0.51,0.49\n").unwrap();
    let o = difflab(&["--config", config("simulate.toml").to_str().unwrap(), "estimate", "--input", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
