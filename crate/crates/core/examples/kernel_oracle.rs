// Memory kernel of the Lorentzian bath: closed form against direct
// quadrature of the spectral integral, plus the regime numbers that say
// whether the bath is Markovian.
//
// `cargo run --release --example kernel_oracle`

use hlspin::acceptance::{kernel_lag_range, kernel_table, max_kernel_error};
use hlspin::model::{regime_report, LorentzianCoupling};

pub fn run_example() -> hlspin::Result<Vec<(f64, f64)>> {
    let mut errors = Vec::new();
    for gamma in [0.05, 7.5, 20.0] {
        let c = LorentzianCoupling::new(5.0, gamma, gamma)?;
        let rows = kernel_table(&c, 40, None, None)?;
        let err = max_kernel_error(&rows);
        let r = regime_report(&c, 0.0)?;
        println!(
            "Γ = {gamma:>5}: tau in [0, {:.1}], max rel err {err:.2e}, λ = {:.3}, μ0 = {:.2}",
            kernel_lag_range(&c),
            r.lambda,
            r.mu0.unwrap_or(f64::INFINITY)
        );
        errors.push((gamma, err));
    }
    Ok(errors)
}

fn main() -> hlspin::Result<()> {
    run_example().map(|_| ())
}
