// Without zero-point fluctuations a classical spin in its excited state
// has nothing to push it: at T = 0 both the classical and the
// occupation-only spectra leave S_z at exactly +1.
//
// `cargo run --release --example frozen_dynamics`

use hlspin::hl::{run_ensemble, HLConfig};
use hlspin::model::{LorentzianCoupling, SpectrumKind};
use hlspin::noise::TimeGrid;

pub fn run_example() -> hlspin::Result<bool> {
    let c = LorentzianCoupling::new(5.0, 7.5, 7.5)?;
    let grid = TimeGrid::covering(0.005, 60.0)?;
    let mut frozen = true;
    for kind in [
        SpectrumKind::ClassicalLinear { temperature: 0.0 },
        SpectrumKind::QuantumNoZeroPoint { temperature: 0.0 },
        SpectrumKind::QuantumZeroPoint { temperature: 0.0 },
    ] {
        let e = run_ensemble(&HLConfig::new(c, kind, grid), 32, 5)?;
        let constant = e.mean_sz.iter().all(|&z| z == 1.0);
        println!("{:<22} S_z(60) = {:+.4}  constant +1: {constant}", kind.name(), e.mean_sz[e.mean_sz.len() - 1]);
        if !matches!(kind, SpectrumKind::QuantumZeroPoint { .. }) {
            frozen &= constant;
        }
    }
    Ok(frozen)
}

fn main() -> hlspin::Result<()> {
    run_example().map(|_| ())
}
