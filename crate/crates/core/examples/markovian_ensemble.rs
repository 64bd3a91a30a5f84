// Ensemble-averaged decay in the Markovian regime. The classical mean
// follows the exponential rate early on but settles near −0.31 instead
// of the ground state.
//
// `cargo run --release --example markovian_ensemble -- 5000`

use hlspin::analysis::{fit_decay_rate, steady_state, Curve};
use hlspin::hl::{run_ensemble, HLConfig};
use hlspin::model::{LorentzianCoupling, SpectrumKind};
use hlspin::noise::TimeGrid;
use hlspin::ww::markovian_decay;

pub fn run_example(n_traj: usize) -> hlspin::Result<(f64, f64)> {
    let c = LorentzianCoupling::new(5.0, 7.5, 7.5)?;
    let mut cfg = HLConfig::new(
        c,
        SpectrumKind::QuantumZeroPoint { temperature: 0.0 },
        TimeGrid::covering(0.005, 60.0)?,
    );
    cfg.record_stride = 10;
    let e = run_ensemble(&cfg, n_traj, 7)?;
    let mean = Curve::from(&e);
    for k in (0..mean.len()).step_by(120) {
        println!(
            "t = {:4.0}  mean S_z = {:+.3} ± {:.3}   Markovian {:+.3}",
            mean.t[k],
            mean.y[k],
            e.stderr_sz[k],
            markovian_decay(c.decay_rate(), mean.t[k])
        );
    }
    let plateau = steady_state(&mean, 0.2)?.value;
    let rate = fit_decay_rate(&mean, plateau)?.rate;
    println!("{n_traj} trajectories: plateau {plateau:.3}, early rate {rate:.3} (λ = {})", c.decay_rate());
    Ok((plateau, rate))
}

fn main() -> hlspin::Result<()> {
    let n = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1000);
    run_example(n).map(|_| ())
}
