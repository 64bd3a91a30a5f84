//! Every example compiles into this test and runs at reduced size.

macro_rules! example {
    ($name:ident, $file:literal) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }
    };
}

example!(kernel_oracle, "kernel_oracle.rs");
example!(noise_spectrum, "noise_spectrum.rs");
example!(single_trajectories, "single_trajectories.rs");
example!(markovian_ensemble, "markovian_ensemble.rs");
example!(volterra_reference, "volterra_reference.rs");
example!(high_temperature, "high_temperature.rs");
example!(frozen_dynamics, "frozen_dynamics.rs");
example!(compare_curves, "compare_curves.rs");
example!(config_run, "config_run.rs");

#[test]
fn kernel_oracle_runs() {
    for (gamma, err) in kernel_oracle::run_example().unwrap() {
        assert!(err < 1e-4, "Γ={gamma}: {err}");
    }
}

#[test]
fn noise_spectrum_runs() {
    // 300 traces: per-block scatter is about 1.6%
    assert!(noise_spectrum::run_example().unwrap() < 0.1);
}

#[test]
fn single_trajectories_run() {
    let runs = single_trajectories::run_example().unwrap();
    assert_eq!(runs.len(), 3);
    assert!(runs.iter().all(|r| r.s_samples[0].s.z == 1.0));
    assert_ne!(runs[0].s_samples, runs[1].s_samples);
}

#[test]
fn markovian_ensemble_runs() {
    let (plateau, rate) = markovian_ensemble::run_example(400).unwrap();
    assert!((plateau + 0.31).abs() < 0.1, "{plateau}");
    assert!(rate > 0.05 && rate < 0.2, "{rate}");
}

#[test]
fn volterra_reference_runs() {
    volterra_reference::run_example().unwrap();
}

#[test]
fn high_temperature_runs() {
    let (plateau, _) = high_temperature::run_example(200).unwrap();
    assert!(plateau.abs() < 0.2, "{plateau}");
}

#[test]
fn frozen_dynamics_runs() {
    assert!(frozen_dynamics::run_example().unwrap());
}

#[test]
fn compare_curves_runs() {
    let (report, svg) = compare_curves::run_example(100).unwrap();
    assert!(report.n_compared > 0);
    assert!(svg.starts_with("<svg") && svg.contains("stroke-dasharray"));
}

#[test]
fn config_run_runs() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = config_run::run_example(dir.path()).unwrap();
    assert_eq!(outcome.exit_code, 0);
    for f in ["ensemble.csv", "reference.csv", "comparison.txt", "compare.svg", "compare.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}
