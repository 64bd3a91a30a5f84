// Colored noise with the zero-temperature quantum spectrum: synthesize
// traces by spectral filtering and check the averaged periodogram against
// the target around resonance.
//
// `cargo run --release --example noise_spectrum`

use hlspin::acceptance::psd_check;
use hlspin::model::{LorentzianCoupling, SpectrumKind};

pub fn run_example() -> hlspin::Result<f64> {
    let c = LorentzianCoupling::new(5.0, 7.5, 7.5)?;
    let kind = SpectrumKind::QuantumZeroPoint { temperature: 0.0 };
    let check = psd_check(&c, &kind, 0.01, 2048, 300, 1)?;
    for (w, p) in check.estimate.block_average(0, 16).into_iter().take(12) {
        let i = check.estimate.omega.partition_point(|&x| x < w);
        println!("ω = {w:6.2}  estimate {p:.4e}  target {:.4e}", check.theory[i]);
    }
    let err = check.band_error.unwrap_or(f64::NAN);
    println!("band [{}, {}]: worst block error {err:.3}", check.band.0, check.band.1);
    Ok(err)
}

fn main() -> hlspin::Result<()> {
    run_example().map(|_| ())
}
