use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hlspin::config::{load_config, Experiment};
use hlspin::error::EXIT_VALIDATION;
use hlspin::experiment::{exit_code, run_experiment};

/// Classical spin in a quantum-noise bath: simulations and reference checks.
///
/// Exit status: 0 success, 1 invalid input, 2 numerical failure,
/// 3 acceptance check missed.
#[derive(Parser, Debug)]
#[command(name = "hlspin", version)]
struct Cli {
    /// Run configuration (`key = value` per line).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads. Changes speed only, never output.
    #[arg(long)]
    threads: Option<usize>,
    /// Experiment to run; overrides `experiment` in the config.
    #[arg(long)]
    experiment: Option<Experiment>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_VALIDATION as u8 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(EXIT_VALIDATION as u8);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(EXIT_VALIDATION as u8);
        }
    }
    let mut cfg = match load_config(&cli.config, cli.experiment) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    let result = run_experiment(&cfg);
    match &result {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            println!("outputs in {}", cfg.out_dir.display());
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
