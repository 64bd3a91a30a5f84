//! Experiment drivers: each writes CSV data, SVG figures and a JSON
//! metadata sidecar into the output directory.
//!
//! CSV, SVG and report files depend only on the configuration. The
//! sidecar also records wall-clock time, so it is the one file that
//! differs between reruns.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::acceptance::{self, psd_check, CaseRun};
use crate::analysis::{compare, fit_decay_rate, steady_state, ComparisonReport, Curve};
use crate::config::{Experiment, RunConfig};
use crate::error::{invalid, Result, EXIT_ACCEPTANCE};
use crate::hl::{run_ensemble, EnsembleResult, HLConfig, TrajectoryRunner};
use crate::model::regime_report;
use crate::noise::{NoiseSynth, SeedSpec, TimeGrid};
use crate::plot::{write_svg, FigureSpec, LineStyle, PlotSeries};
use crate::ww::{high_t_decay, markovian_decay, solve_volterra, HighTParams};

/// What a run produced.
#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub exit_code: i32,
    /// Human-readable result lines, also stored in the sidecar.
    pub summary: Vec<String>,
    pub artifacts: Vec<PathBuf>,
}

struct Run<'a> {
    cfg: &'a RunConfig,
    dir: PathBuf,
    outcome: RunOutcome,
    extra: serde_json::Map<String, Value>,
}

impl<'a> Run<'a> {
    fn path(&mut self, name: &str) -> Result<PathBuf> {
        let p = self.dir.join(name);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent)?;
        }
        self.outcome.artifacts.push(p.clone());
        Ok(p)
    }

    fn write_with(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let p = self.path(name)?;
        let mut out = BufWriter::new(File::create(&p)?);
        f(&mut out)?;
        out.flush()?;
        Ok(())
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let p = self.path(name)?;
        std::fs::write(p, body)?;
        Ok(())
    }

    fn svg(&mut self, name: &str, spec: &FigureSpec) -> Result<()> {
        let p = self.path(name)?;
        write_svg(spec, &p)
    }

    fn note(&mut self, line: String) {
        self.outcome.summary.push(line);
    }

    fn record(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        self.extra.insert(key.into(), serde_json::to_value(value)?);
        Ok(())
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    experiment: &'static str,
    status: String,
    config: &'a RunConfig,
    config_text: String,
    master_seed: u64,
    seed_scheme: &'static str,
    started_unix: u64,
    wall_clock_seconds: f64,
    summary: &'a [String],
    numerics: Value,
    outputs: Vec<String>,
    results: &'a serde_json::Map<String, Value>,
}

const SEED_SCHEME: &str = "trajectory i uses ChaCha8 seeded by master_seed on stream 4i + axis";

/// Runs `cfg.experiment` into `cfg.out_dir`.
///
/// Returns `Err` when a stage fails; the sidecar is still written and its
/// `status` names the failure. Acceptance misses are not errors: they
/// give exit code 3.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunOutcome> {
    let started = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut run = Run {
        cfg,
        dir: cfg.out_dir.clone(),
        outcome: RunOutcome::default(),
        extra: serde_json::Map::new(),
    };
    let result = match cfg.experiment {
        Experiment::NoiseCheck => noise_check(&mut run),
        Experiment::KernelCheck => kernel_check(&mut run),
        Experiment::HlRun => hl_run(&mut run),
        Experiment::WwRun => ww_run(&mut run),
        Experiment::HighT => high_t(&mut run),
        Experiment::Compare => compare_run(&mut run),
        Experiment::PaperSuite => paper_suite(&mut run),
    };
    let status = match (&result, run.outcome.exit_code) {
        (Err(e), _) => format!("failed (partial outputs): {e}"),
        (Ok(()), 0) => "complete".into(),
        (Ok(()), _) => "complete, acceptance failed".into(),
    };
    let meta_name = format!("{}.json", cfg.experiment.name());
    let outputs = run
        .outcome
        .artifacts
        .iter()
        .map(|p| p.strip_prefix(&run.dir).unwrap_or(p).display().to_string())
        .collect();
    let meta = Metadata {
        tool: "hlspin",
        version: env!("CARGO_PKG_VERSION"),
        experiment: cfg.experiment.name(),
        status,
        config: cfg,
        config_text: cfg.to_kv(),
        master_seed: cfg.master_seed,
        seed_scheme: SEED_SCHEME,
        started_unix,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        summary: &run.outcome.summary,
        numerics: numerics(),
        outputs,
        results: &run.extra,
    };
    let meta_path = run.dir.join(&meta_name);
    std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)?)?;
    result?;
    run.outcome.artifacts.push(meta_path);
    Ok(run.outcome)
}

/// Internal constants that shape the numbers in every output.
fn numerics() -> Value {
    json!({
        "norm_drift_limit": crate::hl::NORM_DRIFT_LIMIT,
        "ensemble_chunk": crate::hl::ENSEMBLE_CHUNK,
        "noise_realness_tolerance": crate::noise::REALNESS_TOLERANCE,
        "noise_padding": "max(2n, n + 8*tau_K/dt) rounded up to a 2^a 3^b 5^c length",
        "volterra_amplitude_limit": crate::ww::AMPLITUDE_LIMIT,
        "fit_window": crate::analysis::FIT_WINDOW,
        "fit_min_points": crate::analysis::FIT_MIN_POINTS,
        "oscillation_hysteresis_relative": crate::analysis::DEFAULT_HYSTERESIS,
        "oscillation_hysteresis_noisy": "4 x median stderr",
        "kernel_quadrature": "trapezoid; omega_max >= 50*max(omega0, gamma), tail < 1e-11; spacing <= min(gamma/50, omega0/50, 2pi/(10 tau), 2pi/(tau + 30/r_slow))",
        "psd_block": 8,
    })
}

fn fail_if(run: &mut Run, failed: bool) {
    if failed {
        run.outcome.exit_code = EXIT_ACCEPTANCE;
    }
}

fn noise_check(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let c = cfg.coupling()?;
    let kind = cfg.spectrum_kind();
    let check = psd_check(&c, &kind, cfg.dt, cfg.psd_samples, cfg.psd_traces, cfg.master_seed)?;
    let first = NoiseSynth::new(TimeGrid::new(cfg.dt, cfg.psd_samples)?, &kind, &c)?
        .trace(&SeedSpec::new(cfg.master_seed, 0))?;
    run.write_with("noise_trace.csv", |w| first.write_csv(w))?;
    run.write_with("noise_psd.csv", |w| {
        writeln!(w, "omega,psd,theory")?;
        for ((o, p), t) in check.estimate.omega.iter().zip(&check.estimate.power[0]).zip(&check.theory) {
            writeln!(w, "{o},{p},{t}")?;
        }
        Ok(())
    })?;
    let keep = check
        .estimate
        .omega
        .iter()
        .take_while(|&&w| w <= 4.0 * c.omega0())
        .count()
        .max(2);
    let omega = check.estimate.omega[..keep].to_vec();
    let fig = FigureSpec::new(format!("noise spectrum ({})", kind.name()), "omega", "power")
        .with(PlotSeries::new(
            format!("estimate, {} traces", cfg.psd_traces),
            omega.clone(),
            check.estimate.power[0][..keep].to_vec(),
            LineStyle::nth(0),
        ))
        .with(PlotSeries::new("target", omega, check.theory[..keep].to_vec(), LineStyle::dashed("black")));
    run.svg("noise_psd.svg", &fig)?;
    match check.band_error {
        Some(err) => {
            run.note(format!(
                "PSD band error {err:.4} in [{}, {}] (tolerance 0.05)",
                check.band.0, check.band.1
            ));
            fail_if(run, !(err < 0.05));
        }
        None => run.note(format!("{} spectrum is silent: all traces are zero", kind.name())),
    }
    run.record("psd_band_error", check.band_error)
}

fn kernel_check(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let c = cfg.coupling()?;
    let rows = acceptance::kernel_table(&c, cfg.kernel_samples, cfg.omega_max, cfg.quadrature_points)?;
    run.write_with("kernel_check.csv", |w| {
        writeln!(w, "tau,closed,quadrature,rel_error")?;
        for r in &rows {
            writeln!(w, "{},{},{},{}", r.tau, r.closed, r.quadrature, r.rel_error)?;
        }
        Ok(())
    })?;
    let tau: Vec<f64> = rows.iter().map(|r| r.tau).collect();
    let fig = FigureSpec::new(format!("memory kernel, Γ = {}", c.gamma()), "tau", "k(tau)")
        .with(PlotSeries::new("closed form", tau.clone(), rows.iter().map(|r| r.closed).collect(), LineStyle::nth(0)))
        .with(PlotSeries::new(
            "quadrature",
            tau,
            rows.iter().map(|r| r.quadrature).collect(),
            LineStyle::dashed("black"),
        ));
    run.svg("kernel_check.svg", &fig)?;
    let err = acceptance::max_kernel_error(&rows);
    run.note(format!(
        "max relative kernel error {err:.3e} over tau in [0, {}] (tolerance {:e})",
        acceptance::kernel_lag_range(&c),
        acceptance::KERNEL_TOLERANCE
    ));
    fail_if(run, !(err < acceptance::KERNEL_TOLERANCE));
    run.record("max_rel_error", err)?;
    run.record("regime", regime_report(&c, cfg.temperature)?)
}

fn write_ensemble(run: &mut Run, name: &str, e: &EnsembleResult) -> Result<()> {
    run.write_with(name, |w| e.write_csv(w))
}

fn write_curve(run: &mut Run, name: &str, c: &Curve) -> Result<()> {
    run.write_with(name, |w| c.write_csv(w))
}

fn ensemble(run: &mut Run) -> Result<(HLConfig, EnsembleResult)> {
    let rc = run.cfg;
    let cfg = rc.hl_config()?;
    let e = run_ensemble(&cfg, rc.n_traj, rc.master_seed)?;
    run.record("digest", &e.digest)?;
    run.record("n_traj", e.n_traj)?;
    run.record("stream_indices", format!("0..{}", e.n_traj))?;
    run.record("hl_config", cfg)?;
    Ok((cfg, e))
}

/// Analytic companion curve: Markovian decay at T = 0, the thermal decay
/// otherwise.
fn analytic_reference(cfg: &RunConfig, grid: &TimeGrid) -> Result<(String, Curve)> {
    let c = cfg.coupling()?;
    if cfg.temperature == 0.0 {
        let lambda = c.decay_rate();
        Ok(("Markovian decay".into(), Curve::from_fn(grid, |t| markovian_decay(lambda, t))))
    } else {
        let p = HighTParams::for_coupling(&c, cfg.temperature)?;
        Ok(("high-T decay".into(), Curve::from_fn(grid, |t| high_t_decay(&p, t))))
    }
}

fn curve_summary(run: &mut Run, label: &str, curve: &Curve) {
    let tail = run.cfg.tail_fraction;
    match steady_state(curve, tail) {
        Ok(s) => {
            let rate = fit_decay_rate(curve, s.value).map(|f| f.rate).ok();
            run.note(format!(
                "{label}: steady state {:.4} (sd {:.4}), early rate {}",
                s.value,
                s.sd,
                rate.map_or_else(|| "not fitted".into(), |r| format!("{r:.4}"))
            ));
            if let Some(w) = s.warning {
                run.note(format!("{label}: {w}"));
            }
        }
        Err(e) => run.note(format!("{label}: {e}")),
    }
}

fn hl_run(run: &mut Run) -> Result<()> {
    let (hl, e) = ensemble(run)?;
    write_ensemble(run, "ensemble.csv", &e)?;
    let runner = TrajectoryRunner::new(&hl)?;
    let shown = (0..run.cfg.n_show.min(e.n_traj) as u64)
        .into_par_iter()
        .map(|i| runner.run(&SeedSpec::new(e.master_seed, i)))
        .collect::<Result<Vec<_>>>()?;
    let mut traj_fig = FigureSpec::new("single trajectories", "t", "S_z").y_range(-1.05, 1.05);
    for (i, traj) in shown.iter().enumerate() {
        run.write_with(&format!("trajectory_{i}.csv"), |w| traj.write_csv(w))?;
        traj_fig = traj_fig.with(PlotSeries::new(
            format!("realization {i}"),
            traj.grid.times(),
            traj.sz(),
            LineStyle::nth(i),
        ));
    }
    if !shown.is_empty() {
        run.svg("trajectories.svg", &traj_fig)?;
    }
    let mean = Curve::from(&e);
    let (label, reference) = analytic_reference(run.cfg, &e.grid)?;
    let fig = FigureSpec::new(format!("ensemble mean, {} trajectories", e.n_traj), "t", "S_z")
        .with(PlotSeries::from_curve("classical mean", &mean, LineStyle::nth(0)))
        .with(PlotSeries::from_curve(label, &reference, LineStyle::dashed("black")));
    run.svg("ensemble.svg", &fig)?;
    curve_summary(run, "classical mean", &mean);
    Ok(())
}

fn ww_run(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    if cfg.temperature != 0.0 {
        return Err(invalid("temperature", "ww-run solves the zero-temperature amplitude equation; set 0"));
    }
    let c = cfg.coupling()?;
    let sol = solve_volterra(&c, &cfg.grid()?, cfg.ww_stepper)?;
    let curve = sol.curve();
    write_curve(run, "ww.csv", &curve)?;
    let lambda = c.decay_rate();
    let markov = Curve::from_fn(&sol.grid, |t| markovian_decay(lambda, t));
    let fig = FigureSpec::new(format!("amplitude equation, Γ = {}", c.gamma()), "t", "S_z")
        .with(PlotSeries::from_curve("WW", &curve, LineStyle::nth(1)))
        .with(PlotSeries::from_curve("Markovian decay", &markov, LineStyle::dashed("black")));
    run.svg("ww.svg", &fig)?;
    let dev = acceptance::markov_deviation(&sol, lambda);
    run.note(format!("max deviation from Markovian decay {dev:.4} (lambda = {lambda})"));
    run.record("markov_max_dev", dev)?;
    curve_summary(run, "WW", &curve);
    Ok(())
}

fn report(run: &mut Run, r: &ComparisonReport) -> Result<()> {
    run.text("comparison.txt", &r.to_kv())?;
    run.note(format!("max_dev {:.4}, rmse {:.4} over {} points", r.max_dev, r.rmse, r.n_compared));
    run.record("comparison", r)
}

fn high_t(run: &mut Run) -> Result<()> {
    let (_, e) = ensemble(run)?;
    write_ensemble(run, "ensemble.csv", &e)?;
    let c = run.cfg.coupling()?;
    let p = HighTParams::for_coupling(&c, run.cfg.temperature)?;
    let reference = Curve::from_fn(&e.grid, |t| high_t_decay(&p, t));
    write_curve(run, "high_t.csv", &reference)?;
    let mean = Curve::from(&e);
    report(run, &compare(&mean, &reference)?)?;
    let fig = FigureSpec::new(format!("T = {}", run.cfg.temperature), "t", "S_z")
        .with(PlotSeries::from_curve("classical mean", &mean, LineStyle::nth(0)))
        .with(PlotSeries::from_curve("high-T decay", &reference, LineStyle::dashed("black")));
    run.svg("high_t.svg", &fig)?;
    run.note(format!(
        "quantum rate {:.4}, steady state {:.4}, n̄ = {:.3}",
        p.rate(),
        p.steady_state(),
        p.nbar
    ));
    run.record("regime", regime_report(&c, run.cfg.temperature)?)?;
    curve_summary(run, "classical mean", &mean);
    Ok(())
}

fn compare_run(run: &mut Run) -> Result<()> {
    let (_, e) = ensemble(run)?;
    write_ensemble(run, "ensemble.csv", &e)?;
    let cfg = run.cfg;
    let c = cfg.coupling()?;
    let mean = Curve::from(&e);
    let (label, analytic) = analytic_reference(cfg, &e.grid)?;
    let mut fig = FigureSpec::new("classical vs quantum", "t", "S_z")
        .with(PlotSeries::from_curve("classical mean", &mean, LineStyle::nth(0)));
    let reference = if cfg.temperature == 0.0 {
        let ww = solve_volterra(&c, &cfg.grid()?, cfg.ww_stepper)?.curve();
        fig = fig.with(PlotSeries::from_curve("WW", &ww, LineStyle::nth(1)));
        ww
    } else {
        analytic.clone()
    };
    fig = fig.with(PlotSeries::from_curve(label, &analytic, LineStyle::dashed("black")));
    write_curve(run, "reference.csv", &reference)?;
    report(run, &compare(&mean, &reference)?)?;
    run.svg("compare.svg", &fig)?;
    curve_summary(run, "classical mean", &mean);
    curve_summary(run, "reference", &reference);
    Ok(())
}

fn case_outputs(run: &mut Run, r: &CaseRun) -> Result<()> {
    let name = r.spec.name;
    write_ensemble(run, &format!("{name}/ensemble.csv"), &r.ensemble)?;
    write_curve(run, &format!("{name}/reference.csv"), &r.reference)?;
    run.text(&format!("{name}/comparison.txt"), &r.report.to_kv())?;
    let ref_label = match r.spec.reference {
        acceptance::Reference::Volterra => "WW",
        acceptance::Reference::HighT => "high-T decay",
        acceptance::Reference::Frozen => "frozen",
    };
    let mut fig = FigureSpec::new(
        format!("{name}: Γ = {}, α = {}, ω0 = {}", r.spec.gamma, r.spec.alpha, r.spec.omega0),
        "t",
        "S_z",
    )
    .with(PlotSeries::from_curve(
        format!("classical mean ({})", r.spec.n_traj),
        &r.classical,
        LineStyle::nth(0),
    ))
    .with(PlotSeries::from_curve(ref_label, &r.reference, LineStyle::nth(1)));
    if r.spec.reference == acceptance::Reference::Volterra {
        let lambda = r.spec.coupling()?.decay_rate();
        let markov = Curve::from_fn(&r.ensemble.grid, |t| markovian_decay(lambda, t));
        fig = fig.with(PlotSeries::from_curve("Markovian decay", &markov, LineStyle::dashed("black")));
    }
    run.svg(&format!("{name}/plot.svg"), &fig)?;
    let meta = json!({
        "case": r.spec,
        "hl_config": r.hl_config,
        "digest": r.ensemble.digest,
        "n_traj": r.ensemble.n_traj,
        "master_seed": r.ensemble.master_seed,
        "envelope_rate": r.envelope_rate,
        "wall_clock_seconds": r.wall_seconds,
        "comparison": r.report,
    });
    let p = run.path(&format!("{name}/case.json"))?;
    std::fs::write(p, serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

fn paper_suite(run: &mut Run) -> Result<()> {
    let scale = run.cfg.suite;
    let seed = run.cfg.master_seed;
    let mut runs = Vec::new();
    for spec in acceptance::paper_cases(scale) {
        let r = acceptance::run_case(&spec, seed)?;
        case_outputs(run, &r)?;
        run.note(format!(
            "{}: {} trajectories, max_dev {:.4}, {:.1} s",
            spec.name, spec.n_traj, r.report.max_dev, r.wall_seconds
        ));
        runs.push(r);
    }
    // three realizations next to the first Markovian case
    if let Some(first) = runs.first() {
        let runner = TrajectoryRunner::new(&first.hl_config)?;
        let mut fig = FigureSpec::new("three realizations", "t", "S_z").y_range(-1.05, 1.05);
        for i in 0..3u64 {
            let traj = runner.run(&SeedSpec::new(seed, i))?;
            run.write_with(&format!("{}/trajectory_{i}.csv", first.spec.name), |w| traj.write_csv(w))?;
            fig = fig.with(PlotSeries::new(
                format!("realization {i}"),
                traj.grid.times(),
                traj.sz(),
                LineStyle::nth(i as usize),
            ));
        }
        run.svg(&format!("{}/trajectories.svg", first.spec.name), &fig)?;
    }
    let verdicts = acceptance::evaluate(&runs, scale)?;
    let text: String = verdicts.iter().map(|v| format!("{v}\n")).collect();
    run.text("acceptance.txt", &text)?;
    for v in &verdicts {
        run.note(v.to_string());
    }
    fail_if(run, verdicts.iter().any(|v| !v.passed));
    run.record("verdicts", &verdicts)
}

/// Exit status for a finished or failed run.
pub fn exit_code(result: &Result<RunOutcome>) -> i32 {
    match result {
        Ok(o) => o.exit_code,
        Err(e) => e.exit_code(),
    }
}

/// Convenience for examples and tests: parse `text`, point the output at
/// `out`, run.
pub fn run_text(text: &str, out: &Path) -> Result<RunOutcome> {
    let mut cfg = RunConfig::parse(text, None)?;
    cfg.out_dir = out.to_path_buf();
    run_experiment(&cfg)
}
