// Thermal bath at T = 200: rate-equation decay, its Markovianity
// parameter, and a small classical ensemble against it.
//
// `cargo run --release --example high_temperature -- 2500`

use hlspin::analysis::{fit_decay_rate, steady_state, Curve};
use hlspin::hl::{run_ensemble, HLConfig};
use hlspin::model::{regime_report, LorentzianCoupling, SpectrumKind};
use hlspin::noise::TimeGrid;
use hlspin::ww::HighTParams;

pub fn run_example(n_traj: usize) -> hlspin::Result<(f64, f64)> {
    let t = 200.0;
    for (gamma, omega0, alpha) in [(10.0, 5.0, 1.0), (25.0, 12.5, 2.5), (50.0, 25.0, 5.0)] {
        let c = LorentzianCoupling::new(omega0, gamma, alpha)?;
        let p = HighTParams::for_coupling(&c, t)?;
        let r = regime_report(&c, t)?;
        println!(
            "Γ = {gamma}: n̄ = {:.2}, rate {:.4}, steady {:.4}, μ_T = {:.1}",
            p.nbar,
            p.rate(),
            p.steady_state(),
            r.mu_t.unwrap_or(f64::INFINITY)
        );
    }
    let c = LorentzianCoupling::new(5.0, 10.0, 1.0)?;
    let p = HighTParams::for_coupling(&c, t)?;
    let mut cfg = HLConfig::new(c, SpectrumKind::QuantumZeroPoint { temperature: t }, TimeGrid::covering(0.005, 8.0)?);
    cfg.record_stride = 10;
    let mean = Curve::from(&run_ensemble(&cfg, n_traj, 3)?);
    let plateau = steady_state(&mean, 0.2)?.value;
    let rate = fit_decay_rate(&mean, plateau)?.rate;
    println!(
        "classical, {n_traj} trajectories: steady {plateau:.4} (quantum {:.4}), rate {rate:.3} (quantum {:.3})",
        p.steady_state(),
        p.rate()
    );
    Ok((plateau, rate))
}

fn main() -> hlspin::Result<()> {
    let n = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1000);
    run_example(n).map(|_| ())
}
