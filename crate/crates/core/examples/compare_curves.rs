// Classical mean against the amplitude-equation result, summarized as a
// comparison report and drawn as an SVG with the exponential law dashed.
//
// `cargo run --release --example compare_curves -- out.svg`

use hlspin::analysis::{compare, ComparisonReport, Curve};
use hlspin::hl::{run_ensemble, HLConfig};
use hlspin::model::{LorentzianCoupling, SpectrumKind};
use hlspin::noise::TimeGrid;
use hlspin::plot::{render_svg, FigureSpec, LineStyle, PlotSeries};
use hlspin::ww::{markovian_decay, solve_volterra, VolterraStepper};

pub fn run_example(n_traj: usize) -> hlspin::Result<(ComparisonReport, String)> {
    let c = LorentzianCoupling::new(5.0, 7.5, 7.5)?;
    let grid = TimeGrid::covering(0.005, 40.0)?;
    let mut cfg = HLConfig::new(c, SpectrumKind::QuantumZeroPoint { temperature: 0.0 }, grid);
    cfg.record_stride = 10;
    let classical = Curve::from(&run_ensemble(&cfg, n_traj, 11)?);
    let ww = solve_volterra(&c, &grid, VolterraStepper::Trapezoid)?.curve();
    let report = compare(&classical, &ww)?;
    print!("{}", report.to_kv());
    let markov = Curve::from_fn(&grid, |t| markovian_decay(c.decay_rate(), t));
    let svg = render_svg(
        &FigureSpec::new("classical vs quantum, Γ = 7.5", "t", "S_z")
            .with(PlotSeries::from_curve("classical mean", &classical, LineStyle::nth(0)))
            .with(PlotSeries::from_curve("WW", &ww, LineStyle::nth(1)))
            .with(PlotSeries::from_curve("Markovian decay", &markov, LineStyle::dashed("black"))),
    )?;
    Ok((report, svg))
}

fn main() -> hlspin::Result<()> {
    let (_, svg) = run_example(1000)?;
    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, svg)?;
        println!("wrote {path}");
    }
    Ok(())
}
