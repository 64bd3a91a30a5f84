//! Acceptance checks and the paper run grid.
//!
//! The same functions back the `paper-suite` experiment and the
//! `acceptance` integration test, so both report identical verdicts.
//! A check that cannot be met is reported as a failed [`Verdict`], never
//! as an error; errors mean a run could not be carried out at all.

use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    compare, envelope_decay_rate, fit_decay_rate, noise_hysteresis, oscillation_frequency,
    oscillation_frequency_with, steady_state, ComparisonReport, Curve, Oscillation, DEFAULT_TAIL_FRACTION,
};
use crate::config::SuiteScale;
use crate::error::Result;
use crate::hl::{run_ensemble, EnsembleResult, HLConfig, MemoryMethod, SpinState, TrajectoryRunner};
use crate::model::{
    memory_kernel_closed, memory_kernel_envelope, memory_kernel_quadrature, power_spectrum, regime_report,
    LorentzianCoupling, QuadratureRule, SpectrumKind,
};
use crate::noise::{psd_estimate, NoiseSynth, PsdEstimate, SeedSpec, TimeGrid};
use crate::ww::{high_t_decay, markovian_decay, solve_volterra, HighTParams, VolterraSolution, VolterraStepper};

pub const KERNEL_TOLERANCE: f64 = 1e-4;
pub const PLATEAU: f64 = -0.31;
pub const MARKOV_RATE: f64 = 0.1;
/// Spacing of recorded ensemble samples.
pub const OUTPUT_DT: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: u8,
    pub title: String,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    fn new(id: u8, title: &str, checks: Vec<(bool, String)>) -> Self {
        let passed = checks.iter().all(|(ok, _)| *ok);
        let detail = checks
            .into_iter()
            .map(|(ok, s)| if ok { s } else { format!("{s} [miss]") })
            .collect::<Vec<_>>()
            .join("; ");
        Self {
            id,
            title: title.into(),
            passed,
            detail,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "criterion {} {}: {tag}: {}", self.id, self.title, self.detail)
    }
}

fn coupling(omega0: f64, gamma: f64, alpha: f64) -> Result<LorentzianCoupling> {
    LorentzianCoupling::new(omega0, gamma, alpha)
}

// kernel oracle

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelRow {
    pub tau: f64,
    pub closed: f64,
    pub quadrature: f64,
    /// |quadrature − closed| over the kernel envelope.
    pub rel_error: f64,
}

/// Upper end of the checked lag range, 10·max(τ_K, 1/ω₀).
pub fn kernel_lag_range(c: &LorentzianCoupling) -> f64 {
    10.0 * c.memory_time().max(1.0 / c.omega0())
}

/// Closed form against quadrature at `samples + 1` evenly spaced lags.
/// `omega_max` and `n_points` replace the automatic rule when given.
pub fn kernel_table(
    c: &LorentzianCoupling,
    samples: usize,
    omega_max: Option<f64>,
    n_points: Option<usize>,
) -> Result<Vec<KernelRow>> {
    let tau_max = kernel_lag_range(c);
    (0..=samples)
        .into_par_iter()
        .map(|i| {
            let tau = tau_max * i as f64 / samples.max(1) as f64;
            let auto = QuadratureRule::for_kernel(c, tau);
            let q = memory_kernel_quadrature(
                c,
                tau,
                omega_max.unwrap_or(auto.omega_max),
                n_points.unwrap_or(auto.n_points),
            )?;
            let closed = memory_kernel_closed(c, tau);
            let scale = memory_kernel_envelope(c, tau);
            let diff = (q.value - closed).abs();
            let rel_error = if scale > 0.0 { diff / scale } else { diff };
            Ok(KernelRow {
                tau,
                closed,
                quadrature: q.value,
                rel_error,
            })
        })
        .collect()
}

pub fn max_kernel_error(rows: &[KernelRow]) -> f64 {
    rows.iter().map(|r| r.rel_error).fold(0.0, f64::max)
}

pub const KERNEL_GAMMAS: [f64; 4] = [0.01, 0.05, 7.5, 20.0];

pub fn kernel_oracle(samples: usize) -> Result<Verdict> {
    let mut checks = Vec::new();
    for g in KERNEL_GAMMAS {
        let c = coupling(5.0, g, g)?;
        let err = max_kernel_error(&kernel_table(&c, samples, None, None)?);
        checks.push((
            err < KERNEL_TOLERANCE,
            format!("Γ={g} τ≤{:.1} max rel err {err:.2e}", kernel_lag_range(&c)),
        ));
    }
    Ok(Verdict::new(1, "kernel oracle", checks))
}

// Markovian limit of the amplitude equation

pub fn markov_deviation(sol: &VolterraSolution, lambda: f64) -> f64 {
    sol.sz
        .iter()
        .enumerate()
        .map(|(k, z)| (z - markovian_decay(lambda, sol.grid.time(k))).abs())
        .fold(0.0, f64::max)
}

pub fn markov_limit(dt: f64) -> Result<Verdict> {
    let grid = TimeGrid::covering(dt, 30.0)?;
    let mut checks = Vec::new();
    for (g, bound) in [(20.0, 0.02), (7.5, 0.05)] {
        let c = coupling(5.0, g, g)?;
        let sol = solve_volterra(&c, &grid, VolterraStepper::Trapezoid)?;
        let dev = markov_deviation(&sol, c.decay_rate());
        checks.push((dev < bound, format!("Γ={g} max dev {dev:.4} (bound {bound})")));
    }
    Ok(Verdict::new(2, "Markovian WW limit", checks))
}

// the run grid

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    /// Zero-temperature amplitude equation.
    Volterra,
    /// Thermal rate-equation decay.
    HighT,
    /// S_z = +1 throughout.
    Frozen,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseSpec {
    pub name: &'static str,
    pub omega0: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub spectrum: SpectrumKind,
    pub dt: f64,
    /// `None`: ten envelope decay times of the amplitude solution.
    pub t_max: Option<f64>,
    pub n_traj: usize,
    pub reference: Reference,
    /// Step of the amplitude equation.
    pub ref_dt: f64,
}

impl CaseSpec {
    pub fn coupling(&self) -> Result<LorentzianCoupling> {
        coupling(self.omega0, self.gamma, self.alpha)
    }
}

pub const HIGH_T: f64 = 200.0;
pub const HIGH_T_SETS: [(f64, f64, f64); 3] = [(10.0, 5.0, 1.0), (25.0, 12.5, 2.5), (50.0, 25.0, 5.0)];
pub const HIGH_T_MU: [f64; 3] = [12.5, 195.3, 1560.5];

/// Eight cases: four at T = 0, three at T = 200, one frozen-spectrum check.
pub fn paper_cases(scale: SuiteScale) -> Vec<CaseSpec> {
    let (n_cold, n_hot, hot_span) = match scale {
        SuiteScale::Full => (5000, 25_000, 6.5),
        SuiteScale::Smoke => (2500, 2500, 4.0),
    };
    let zero = SpectrumKind::QuantumZeroPoint { temperature: 0.0 };
    let cold = |name, gamma: f64, dt, t_max| CaseSpec {
        name,
        omega0: 5.0,
        gamma,
        alpha: gamma,
        spectrum: zero,
        dt,
        t_max,
        n_traj: n_cold,
        reference: Reference::Volterra,
        ref_dt: if t_max.is_some() { dt } else { OUTPUT_DT },
    };
    let mut cases = vec![
        cold("markov-7.5", 7.5, 0.005, Some(60.0)),
        cold("markov-20", 20.0, 0.0025, Some(60.0)),
        cold("nonmarkov-0.01", 0.01, 0.01, None),
        cold("nonmarkov-0.05", 0.05, 0.01, None),
    ];
    let names = ["high-t-10", "high-t-25", "high-t-50"];
    for (name, (gamma, omega0, alpha)) in names.into_iter().zip(HIGH_T_SETS) {
        let c = LorentzianCoupling::new(omega0, gamma, alpha).expect("fixed parameters");
        let rate = HighTParams::for_coupling(&c, HIGH_T).expect("fixed temperature").rate();
        let dt = 0.01f64.min(0.05 / omega0).min(0.05 / gamma);
        cases.push(CaseSpec {
            name,
            omega0,
            gamma,
            alpha,
            spectrum: SpectrumKind::QuantumZeroPoint { temperature: HIGH_T },
            dt,
            t_max: Some(((hot_span / rate) / OUTPUT_DT).ceil() * OUTPUT_DT),
            n_traj: n_hot,
            reference: Reference::HighT,
            ref_dt: dt,
        });
    }
    cases.push(CaseSpec {
        name: "frozen-classical",
        omega0: 5.0,
        gamma: 7.5,
        alpha: 7.5,
        spectrum: SpectrumKind::ClassicalLinear { temperature: 0.0 },
        dt: 0.005,
        t_max: Some(60.0),
        n_traj: 64,
        reference: Reference::Frozen,
        ref_dt: 0.005,
    });
    cases
}

#[derive(Debug, Clone)]
pub struct CaseRun {
    pub spec: CaseSpec,
    pub hl_config: HLConfig,
    pub ensemble: EnsembleResult,
    pub classical: Curve,
    pub reference: Curve,
    pub report: ComparisonReport,
    /// Envelope decay rate of the reference, when it oscillates.
    pub envelope_rate: Option<f64>,
    pub wall_seconds: f64,
}

/// Recording stride giving [`OUTPUT_DT`] spacing.
pub fn output_stride(dt: f64) -> usize {
    ((OUTPUT_DT / dt).round() as usize).max(1)
}

fn volterra_reference(c: &LorentzianCoupling, spec: &CaseSpec) -> Result<(Curve, Option<f64>, f64)> {
    match spec.t_max {
        Some(t) => {
            let sol = solve_volterra(c, &TimeGrid::covering(spec.ref_dt, t)?, VolterraStepper::Trapezoid)?;
            let curve = sol.curve();
            let rate = envelope_decay_rate(&curve, -1.0).ok();
            Ok((curve, rate, t))
        }
        None => {
            // probe a generous span, then keep ten envelope decay times
            let probe = 30.0 / c.gamma();
            let sol = solve_volterra(c, &TimeGrid::covering(spec.ref_dt, probe)?, VolterraStepper::Trapezoid)?;
            let curve = sol.curve();
            let rate = envelope_decay_rate(&curve, -1.0)?;
            let horizon = ((10.0 / rate / 50.0).ceil() * 50.0).min(probe);
            Ok((curve.until(horizon), Some(rate), horizon))
        }
    }
}

pub fn run_case(spec: &CaseSpec, master_seed: u64) -> Result<CaseRun> {
    let start = Instant::now();
    let c = spec.coupling()?;
    let (reference, envelope_rate, t_max) = match spec.reference {
        Reference::Volterra => volterra_reference(&c, spec)?,
        Reference::HighT | Reference::Frozen => (Curve::new(vec![0.0], vec![1.0])?, None, spec.t_max.unwrap_or(60.0)),
    };
    let grid = TimeGrid::covering(spec.dt, t_max)?;
    let mut cfg = HLConfig::new(c, spec.spectrum, grid);
    cfg.record_stride = output_stride(spec.dt);
    let ensemble = run_ensemble(&cfg, spec.n_traj, master_seed)?;
    let classical = Curve::from(&ensemble);
    let recorded = cfg.recorded_grid()?;
    let reference = match spec.reference {
        Reference::Volterra => reference,
        Reference::HighT => {
            let p = HighTParams::for_coupling(&c, spec.spectrum.temperature())?;
            Curve::from_fn(&recorded, |t| high_t_decay(&p, t))
        }
        Reference::Frozen => Curve::from_fn(&recorded, |_| 1.0),
    };
    let report = compare(&classical, &reference)?;
    Ok(CaseRun {
        spec: *spec,
        hl_config: cfg,
        ensemble,
        classical,
        reference,
        report,
        envelope_rate,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

fn find<'a>(runs: &'a [CaseRun], name: &str) -> Option<&'a CaseRun> {
    runs.iter().find(|r| r.spec.name == name)
}

fn missing(id: u8, title: &str, name: &str) -> Verdict {
    Verdict::new(id, title, vec![(false, format!("case {name} was not run"))])
}

fn plateau_of(run: &CaseRun) -> Option<f64> {
    steady_state(&run.classical, DEFAULT_TAIL_FRACTION).ok().map(|s| s.value)
}

fn classical_oscillation(run: &CaseRun) -> Option<Oscillation> {
    let h = noise_hysteresis(&run.classical)?;
    oscillation_frequency_with(&run.classical, h).ok()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".into(), |x| format!("{x:.4}"))
}

pub fn t0_plateau(runs: &[CaseRun]) -> Verdict {
    const TITLE: &str = "T=0 classical plateau";
    let (Some(a), Some(b)) = (find(runs, "markov-7.5"), find(runs, "markov-20")) else {
        return missing(3, TITLE, "markov-7.5/markov-20");
    };
    let mut checks = Vec::new();
    for run in [a, b] {
        let p = plateau_of(run);
        checks.push((
            p.is_some_and(|p| (p - PLATEAU).abs() <= 0.05),
            format!("Γ={} plateau {} (target {PLATEAU}±0.05)", run.spec.gamma, fmt_opt(p)),
        ));
    }
    let rate = plateau_of(a).and_then(|f| fit_decay_rate(&a.classical, f).ok()).map(|f| f.rate);
    checks.push((
        rate.is_some_and(|r| (r / MARKOV_RATE - 1.0).abs() <= 0.15),
        format!("Γ=7.5 early rate {} (target {MARKOV_RATE}±15%)", fmt_opt(rate)),
    ));
    Verdict::new(3, TITLE, checks)
}

pub fn non_markov_oscillations(runs: &[CaseRun]) -> Verdict {
    const TITLE: &str = "non-Markovian oscillations";
    let mut checks = Vec::new();
    for name in ["nonmarkov-0.01", "nonmarkov-0.05"] {
        let Some(run) = find(runs, name) else {
            return missing(4, TITLE, name);
        };
        let g = run.spec.gamma;
        let ww = oscillation_frequency(&run.reference).ok();
        let cl = classical_oscillation(run);
        checks.push((
            ww.as_ref().is_some_and(|o| o.periods >= 3.0),
            format!("Γ={g} WW periods {}", ww.as_ref().map_or(0.0, |o| o.periods)),
        ));
        checks.push((
            cl.as_ref().is_some_and(|o| o.periods >= 3.0),
            format!("Γ={g} classical periods {}", cl.as_ref().map_or(0.0, |o| o.periods)),
        ));
        let horizon = *run.reference.t.last().unwrap_or(&0.0);
        let end = *run.reference.y.last().unwrap_or(&0.0);
        let needed = run.envelope_rate.map(|r| 10.0 / r);
        checks.push((
            end < -0.8 && needed.is_some_and(|h| horizon >= h),
            format!(
                "Γ={g} WW end {end:.4} at t={horizon} (needs ≥ {})",
                needed.map_or_else(|| "?".into(), |h| format!("{h:.0}"))
            ),
        ));
        let p = plateau_of(run);
        checks.push((
            p.is_some_and(|p| (p - PLATEAU).abs() <= 0.07),
            format!("Γ={g} classical plateau {}", fmt_opt(p)),
        ));
        let (fc, fw) = (cl.as_ref().map(|o| o.omega), ww.as_ref().map(|o| o.omega));
        checks.push((
            matches!((fc, fw), (Some(a), Some(b)) if a >= b),
            format!("Γ={g} ω classical {} vs WW {}", fmt_opt(fc), fmt_opt(fw)),
        ));
    }
    Verdict::new(4, TITLE, checks)
}

pub fn high_temperature(runs: &[CaseRun], scale: SuiteScale) -> Verdict {
    const TITLE: &str = "high-temperature suite";
    let tol = match scale {
        SuiteScale::Full => 0.05,
        SuiteScale::Smoke => 0.1,
    };
    let mut checks = Vec::new();
    let names = ["high-t-10", "high-t-25", "high-t-50"];
    for (name, mu_target) in names.into_iter().zip(HIGH_T_MU) {
        let Some(run) = find(runs, name) else {
            return missing(5, TITLE, name);
        };
        let g = run.spec.gamma;
        let c = match run.spec.coupling() {
            Ok(c) => c,
            Err(e) => return Verdict::new(5, TITLE, vec![(false, e.to_string())]),
        };
        let p = HighTParams::for_coupling(&c, HIGH_T).expect("fixed temperature");
        let plateau = plateau_of(run);
        checks.push((
            plateau.is_some_and(|v| (v - p.steady_state()).abs() <= tol),
            format!("Γ={g} steady {} vs {:.4}±{tol}", fmt_opt(plateau), p.steady_state()),
        ));
        let rate = plateau.and_then(|f| fit_decay_rate(&run.classical, f).ok()).map(|f| f.rate);
        let q = p.rate();
        checks.push((
            rate.is_some_and(|r| r >= q && r <= 2.0 * q),
            format!("Γ={g} rate {} vs quantum {q:.4}", fmt_opt(rate)),
        ));
        let mu = regime_report(&c, HIGH_T).ok().and_then(|r| r.mu_t);
        checks.push((
            mu.is_some_and(|m| (m - mu_target).abs() <= 0.5),
            format!("Γ={g} μ_T {}", mu.map_or_else(|| "none".into(), |m| format!("{m:.2}"))),
        ));
    }
    Verdict::new(5, TITLE, checks)
}

/// Zero-temperature runs without zero-point noise; every recorded S_z must
/// be exactly 1.
pub fn frozen_dynamics(runs: &[CaseRun]) -> Result<Verdict> {
    let mut checks = Vec::new();
    let grid = TimeGrid::covering(0.005, 60.0)?;
    let c = coupling(5.0, 7.5, 7.5)?;
    for kind in [
        SpectrumKind::ClassicalLinear { temperature: 0.0 },
        SpectrumKind::QuantumNoZeroPoint { temperature: 0.0 },
    ] {
        let e = run_ensemble(&HLConfig::new(c, kind, grid), 8, 3)?;
        checks.push((
            e.mean_sz.iter().all(|&z| z == 1.0),
            format!("{} S_z≡1 over {} steps", kind.name(), grid.len() - 1),
        ));
    }
    if let Some(run) = find(runs, "frozen-classical") {
        checks.push((
            run.ensemble.mean_sz.iter().all(|&z| z == 1.0),
            format!("suite run max dev {}", run.report.max_dev),
        ));
    }
    Ok(Verdict::new(6, "frozen dynamics", checks))
}

/// Norm over 10⁶ steps, memory-path agreement, PSD round trip and
/// pool-size independence.
pub fn structural_invariants() -> Result<Verdict> {
    let mut checks = Vec::new();
    let c = coupling(5.0, 7.5, 7.5)?;
    let zero = SpectrumKind::QuantumZeroPoint { temperature: 0.0 };

    let long = TimeGrid::new(0.005, 1_000_001)?;
    let traj = TrajectoryRunner::new(&HLConfig::new(c, zero, long))?.run(&SeedSpec::new(11, 0))?;
    let drift = traj.s_samples.iter().map(SpinState::norm_error).fold(0.0, f64::max);
    checks.push((drift < 1e-9, format!("norm drift {drift:.1e} over 10^6 steps")));

    let short = TimeGrid::covering(0.002, 20.0)?;
    let mut worst = 0.0f64;
    for g in [7.5, 0.05] {
        let base = HLConfig::new(coupling(5.0, g, g)?, zero, short);
        let mut direct = base;
        direct.memory_method = MemoryMethod::DirectConvolution;
        for i in 0..4 {
            let seed = SeedSpec::new(12, i);
            let a = TrajectoryRunner::new(&base)?.run(&seed)?;
            let b = TrajectoryRunner::new(&direct)?.run(&seed)?;
            for (x, y) in a.s_samples.iter().zip(&b.s_samples) {
                worst = worst.max((x.s - y.s).norm());
            }
        }
    }
    checks.push((worst < 1e-4, format!("aux vs direct max dev {worst:.1e}")));

    let psd = psd_check(&c, &zero, 0.01, 4096, 1000, 13)?;
    checks.push((
        psd.band_error.is_some_and(|e| e < 0.05),
        format!(
            "PSD band error {} in [{:.1}, {:.1}]",
            psd.band_error.map_or_else(|| "none".into(), |e| format!("{e:.3}")),
            psd.band.0,
            psd.band.1
        ),
    ));

    let grid = TimeGrid::covering(0.005, 10.0)?;
    let cfg = HLConfig::new(c, zero, grid);
    let csv = |threads: usize| -> Result<Vec<u8>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| crate::error::invalid("threads", e.to_string()))?;
        let e = pool.install(|| run_ensemble(&cfg, 100, 14))?;
        let mut out = Vec::new();
        e.write_csv(&mut out)?;
        Ok(out)
    };
    let one = csv(1)?;
    let same = [2, 4, 7].into_iter().map(csv).collect::<Result<Vec<_>>>()?.iter().all(|o| *o == one);
    checks.push((same, "ensemble CSV identical for 1, 2, 4, 7 threads".into()));
    Ok(Verdict::new(7, "structural invariants", checks))
}

/// Averaged periodogram of synthesized noise on the x axis against α·P(ω).
#[derive(Debug, Clone)]
pub struct PsdCheck {
    pub estimate: PsdEstimate,
    /// α·P(ω) at the estimate's frequencies.
    pub theory: Vec<f64>,
    /// Largest relative gap after averaging blocks of eight bins inside
    /// `band`; `None` for a silent spectrum.
    pub band_error: Option<f64>,
    pub band: (f64, f64),
}

pub fn psd_check(
    c: &LorentzianCoupling,
    kind: &SpectrumKind,
    dt: f64,
    samples: usize,
    traces: usize,
    master_seed: u64,
) -> Result<PsdCheck> {
    let synth = NoiseSynth::new(TimeGrid::new(dt, samples)?, kind, c)?;
    let traces = (0..traces as u64)
        .into_par_iter()
        .map(|i| synth.trace(&SeedSpec::new(master_seed, i)))
        .collect::<Result<Vec<_>>>()?;
    let estimate = psd_estimate(&traces)?;
    let band = (0.5 * c.omega0(), 2.0 * c.omega0());
    let theory: Vec<f64> = estimate
        .omega
        .iter()
        .map(|&w| c.alpha() * power_spectrum(kind, c, w))
        .collect();
    let block = 8;
    let mut worst = None::<f64>;
    for (chunk, (w, p)) in estimate.block_average(0, block).into_iter().enumerate() {
        if w < band.0 || w > band.1 {
            continue;
        }
        let lo = chunk * block;
        let th = &theory[lo..(lo + block).min(theory.len())];
        let expected = th.iter().sum::<f64>() / th.len() as f64;
        if expected > 0.0 {
            let gap = (p / expected - 1.0).abs();
            worst = Some(worst.map_or(gap, |w| w.max(gap)));
        }
    }
    Ok(PsdCheck {
        estimate,
        theory,
        band_error: worst,
        band,
    })
}

/// Every criterion, in order.
pub fn evaluate(runs: &[CaseRun], scale: SuiteScale) -> Result<Vec<Verdict>> {
    Ok(vec![
        kernel_oracle(200)?,
        markov_limit(0.005)?,
        t0_plateau(runs),
        non_markov_oscillations(runs),
        high_temperature(runs, scale),
        frozen_dynamics(runs)?,
        structural_invariants()?,
    ])
}
