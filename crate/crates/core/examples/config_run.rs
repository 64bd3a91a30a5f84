// The file-driven workflow: parse a flat config, run an experiment, read
// back what landed in the output directory.
//
// `cargo run --release --example config_run -- /tmp/hlspin-out`

use std::path::Path;

use hlspin::config::RunConfig;
use hlspin::experiment::{run_experiment, RunOutcome};

const CONFIG: &str = "\
# Markovian parameter set, small ensemble
experiment = compare
master_seed = 42
omega0 = 5
gamma = 7.5
alpha = 7.5
temperature = 0
dt = 0.005
t_max = 30
n_traj = 200
";

pub fn run_example(out: &Path) -> hlspin::Result<RunOutcome> {
    let mut cfg = RunConfig::parse(CONFIG, None)?;
    cfg.out_dir = out.to_path_buf();
    println!("defaults filled: {}", cfg.defaulted.join(", "));
    let outcome = run_experiment(&cfg)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    for p in &outcome.artifacts {
        println!("  {}", p.display());
    }
    Ok(outcome)
}

fn main() -> hlspin::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "hlspin-out".into());
    run_example(Path::new(&out)).map(|_| ())
}
