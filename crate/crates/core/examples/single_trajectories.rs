// Three stochastic realizations of the spin under zero-point noise,
// starting from the excited state.
//
// `cargo run --release --example single_trajectories`

use hlspin::hl::{run_trajectory, HLConfig, Trajectory};
use hlspin::model::{LorentzianCoupling, SpectrumKind};
use hlspin::noise::{SeedSpec, TimeGrid};

pub fn run_example() -> hlspin::Result<Vec<Trajectory>> {
    let c = LorentzianCoupling::new(5.0, 7.5, 7.5)?;
    let mut cfg = HLConfig::new(
        c,
        SpectrumKind::QuantumZeroPoint { temperature: 0.0 },
        TimeGrid::covering(0.005, 30.0)?,
    );
    cfg.record_stride = 200;
    let runs = (0..3)
        .map(|i| run_trajectory(&cfg, &SeedSpec::new(2024, i)))
        .collect::<hlspin::Result<Vec<_>>>()?;
    println!("   t    S_z[0]   S_z[1]   S_z[2]");
    for k in 0..runs[0].grid.len() {
        let z: Vec<String> = runs.iter().map(|r| format!("{:+.3}", r.s_samples[k].s.z)).collect();
        println!("{:5.1}  {}", runs[0].grid.time(k), z.join("   "));
    }
    Ok(runs)
}

fn main() -> hlspin::Result<()> {
    run_example().map(|_| ())
}
