// Zero-temperature amplitude equation with the Lorentzian kernel. Broad
// baths reproduce the exponential law; a narrow bath gives damped
// oscillations that empty the excited state.
//
// `cargo run --release --example volterra_reference`

use hlspin::acceptance::markov_deviation;
use hlspin::analysis::{envelope_decay_rate, oscillation_frequency};
use hlspin::model::LorentzianCoupling;
use hlspin::noise::TimeGrid;
use hlspin::ww::{solve_volterra, VolterraStepper};

pub fn run_example() -> hlspin::Result<()> {
    let grid = TimeGrid::covering(0.005, 30.0)?;
    for gamma in [7.5, 20.0] {
        let c = LorentzianCoupling::new(5.0, gamma, gamma)?;
        let sol = solve_volterra(&c, &grid, VolterraStepper::Trapezoid)?;
        println!("Γ = {gamma}: max deviation from 2e^(-λt) - 1 is {:.4}", markov_deviation(&sol, c.decay_rate()));
    }
    let c = LorentzianCoupling::new(5.0, 0.05, 0.05)?;
    let sol = solve_volterra(&c, &TimeGrid::covering(0.05, 400.0)?, VolterraStepper::Trapezoid)?;
    let curve = sol.curve();
    let osc = oscillation_frequency(&curve)?;
    println!(
        "Γ = 0.05: ω = {:.4}, {} periods, envelope rate {:.4}, S_z(400) = {:.5}",
        osc.omega,
        osc.periods,
        envelope_decay_rate(&curve, -1.0)?,
        curve.y[curve.len() - 1]
    );
    Ok(())
}

fn main() -> hlspin::Result<()> {
    run_example()
}
