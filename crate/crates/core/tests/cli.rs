//! The `hlspin` binary: exit codes, config errors and reproducible output.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const MARKOV: &str = "\
experiment = hl-run
master_seed = 42
omega0 = 5
gamma = 7.5
alpha = 7.5
temperature = 0
dt = 0.005
t_max = 6
n_traj = 40
";

fn hlspin(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("run.conf");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_hlspin"))
        .arg("--config")
        .arg(&path)
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_seed_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = hlspin(dir.path(), &MARKOV.replace("master_seed = 42\n", ""), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("master_seed"));
}

#[test]
fn config_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let o = hlspin(dir.path(), &MARKOV.replace("gamma = 7.5", "gamma = 0"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
    let o = hlspin(dir.path(), &format!("{MARKOV}colour = blue\n"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 10") && stderr(&o).contains("colour"));
}

#[test]
fn bad_flags_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(hlspin(dir.path(), MARKOV, &["--experiment", "fig-9"]).status.code(), Some(1));
    assert_eq!(hlspin(dir.path(), MARKOV, &["--threads", "0"]).status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_hlspin")).arg("--config").arg(dir.path().join("absent")).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn kernel_check_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ok");
    let o = hlspin(dir.path(), MARKOV, &["--experiment", "kernel-check", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("kernel_check.csv")).unwrap();
    assert!(csv.starts_with("tau,closed,quadrature,rel_error\n"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("max relative kernel error"));

    // too few quadrature points: runs, misses the tolerance
    let coarse = format!("{MARKOV}quadrature_points = 40\n");
    let o = hlspin(dir.path(), &coarse, &["--experiment", "kernel-check", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    // cutoff below the resonance: the quadrature refuses to run
    let low = format!("{MARKOV}omega_max = 20\n");
    let o = hlspin(dir.path(), &low, &["--experiment", "kernel-check", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let meta = fs::read_to_string(out.join("kernel-check.json")).unwrap();
    assert!(meta.contains("failed (partial outputs)"));
}

#[test]
fn unstable_volterra_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "experiment = ww-run\nmaster_seed = 1\ngamma = 0.01\nalpha = 0.1\ndt = 10\noutput_dt = 10\nt_max = 2000\nww_stepper = euler\n";
    let o = hlspin(dir.path(), cfg, &["--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("reduce dt"));
}

#[test]
fn frozen_spectrum_writes_constant_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = format!("{MARKOV}spectrum = classical\n");
    let o = hlspin(dir.path(), &cfg, &["--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("ensemble.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,mean_Sz,stderr_Sz"));
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(&cols[1..], ["1", "0"], "{line}");
    }
}

fn data_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| !p.extension().is_some_and(|x| x == "json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        let o = hlspin(dir.path(), MARKOV, &["--experiment", "compare", "--out", out.to_str().unwrap(), "--threads", threads]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let (fa, fb) = (data_files(&a), data_files(&b));
    assert!(fa.iter().any(|(n, _)| n == "compare.svg"));
    assert_eq!(fa, fb);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("compare.json")).unwrap()).unwrap();
    assert_eq!(meta["status"], "complete");
    assert_eq!(meta["master_seed"], 42);
    assert_eq!(meta["results"]["n_traj"], 40);
    assert!(meta["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
    assert!(meta["version"].is_string());
}

#[test]
fn emitted_config_reloads_to_the_same_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(hlspin(dir.path(), MARKOV, &["--out", out.to_str().unwrap()]).status.code(), Some(0));
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("hl-run.json")).unwrap()).unwrap();
    let text = meta["config_text"].as_str().unwrap();
    let first = hlspin::config::RunConfig::parse(MARKOV, None).unwrap();
    let again = hlspin::config::RunConfig::parse(text, None).unwrap();
    assert_eq!(first.to_kv().replace("out_dir = out\n", ""), again.to_kv().replace(&format!("out_dir = {}\n", out.display()), ""));
}
