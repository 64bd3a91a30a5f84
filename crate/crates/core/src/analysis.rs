//! Curve metrics: early decay rate, plateau, oscillation frequency and the
//! distance between a classical and a quantum curve.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hl::EnsembleResult;
use crate::noise::TimeGrid;

/// Share of the curve averaged for plateau estimates.
pub const DEFAULT_TAIL_FRACTION: f64 = 0.2;

/// Normalized-amplitude window used by [`fit_decay_rate`].
pub const FIT_WINDOW: (f64, f64) = (0.2, 0.9);
pub const FIT_MIN_POINTS: usize = 10;

/// A sampled curve y(t) with optional pointwise standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
}

impl Curve {
    pub fn new(t: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if t.len() != y.len() {
            return Err(Error::GridMismatch(format!("{} times for {} values", t.len(), y.len())));
        }
        if t.is_empty() {
            return Err(Error::EmptySeries("curve has no samples".into()));
        }
        if t.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::Analysis("curve contains non-finite values".into()));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Analysis("curve times must increase strictly".into()));
        }
        Ok(Self { t, y, stderr: None })
    }

    pub fn from_grid(grid: &TimeGrid, y: Vec<f64>) -> Self {
        Self {
            t: grid.times(),
            y,
            stderr: None,
        }
    }

    pub fn from_fn(grid: &TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        let t = grid.times();
        let y = t.iter().map(|&t| f(t)).collect();
        Self { t, y, stderr: None }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Linear interpolation; `None` outside [t_0, t_last].
    pub fn at(&self, t: f64) -> Option<f64> {
        let (first, last) = (self.t[0], *self.t.last()?);
        if t < first || t > last {
            return None;
        }
        let i = self.t.partition_point(|&x| x <= t);
        if i == 0 {
            return Some(self.y[0]);
        }
        if i == self.t.len() {
            return self.y.last().copied();
        }
        let (t0, t1) = (self.t[i - 1], self.t[i]);
        let w = (t - t0) / (t1 - t0);
        Some(self.y[i - 1] + w * (self.y[i] - self.y[i - 1]))
    }

    /// Samples with t ≤ `t_max`.
    pub fn until(&self, t_max: f64) -> Curve {
        let n = self.t.partition_point(|&x| x <= t_max);
        Curve {
            t: self.t[..n].to_vec(),
            y: self.y[..n].to_vec(),
            stderr: self.stderr.as_ref().map(|e| e[..n].to_vec()),
        }
    }

    /// CSV rows `t,Sz`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,Sz")?;
        for (t, y) in self.t.iter().zip(&self.y) {
            writeln!(out, "{t},{y}")?;
        }
        Ok(())
    }
}

impl From<&EnsembleResult> for Curve {
    fn from(e: &EnsembleResult) -> Self {
        Curve {
            t: e.times(),
            y: e.mean_sz.clone(),
            stderr: Some(e.stderr_sz.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Minus the fitted slope of ln((y − floor)/(1 − floor)).
    pub rate: f64,
    pub window: (f64, f64),
    /// RMS residual of the log-linear fit.
    pub residual: f64,
    pub n_points: usize,
}

/// Least-squares exponential rate over the early window where the
/// normalized amplitude r = (y − floor)/(1 − floor) lies in [0.2, 0.9].
///
/// The window opens at the first sample with r ≤ 0.9 and closes before the
/// first sample with r < 0.2; samples inside it that stray outside the
/// band (noise) are skipped.
pub fn fit_decay_rate(curve: &Curve, floor: f64) -> Result<DecayFit> {
    let span = 1.0 - floor;
    if !(span.is_finite() && span > 0.0) {
        return Err(Error::Analysis(format!("floor {floor} must lie below the initial value 1")));
    }
    let r: Vec<f64> = curve.y.iter().map(|y| (y - floor) / span).collect();
    let (lo, hi) = FIT_WINDOW;
    let start = r
        .iter()
        .position(|&x| x <= hi)
        .ok_or_else(|| Error::Analysis("curve never decays below 90% of its span".into()))?;
    let end = r[start..].iter().position(|&x| x < lo).map_or(r.len(), |p| start + p);
    let (xs, ys): (Vec<f64>, Vec<f64>) = (start..end)
        .filter(|&i| r[i] >= lo && r[i] <= hi)
        .map(|i| (curve.t[i], r[i].ln()))
        .unzip();
    if xs.len() < FIT_MIN_POINTS {
        return Err(Error::Analysis(format!(
            "decay window holds {} points, need at least {FIT_MIN_POINTS}",
            xs.len()
        )));
    }
    let (slope, intercept) = linear_fit(&xs, &ys);
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / xs.len() as f64)
        .sqrt();
    Ok(DecayFit {
        rate: -slope,
        window: (xs[0], xs[xs.len() - 1]),
        residual,
        n_points: xs.len(),
    })
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub value: f64,
    pub sd: f64,
    pub n_points: usize,
    /// Set when the tail still drifts by more than 3× its scatter.
    pub warning: Option<String>,
}

/// Mean and sample standard deviation over the final `tail_fraction` of
/// the samples.
pub fn steady_state(curve: &Curve, tail_fraction: f64) -> Result<SteadyState> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::Analysis(format!("tail fraction {tail_fraction} outside (0, 1]")));
    }
    let n = curve.len();
    let m = ((n as f64 * tail_fraction).round() as usize).clamp(1, n);
    let (t, y) = (&curve.t[n - m..], &curve.y[n - m..]);
    let value = y.iter().sum::<f64>() / m as f64;
    let sd = if m > 1 {
        (y.iter().map(|v| (v - value).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut warning = None;
    if m > 2 {
        let (slope, _) = linear_fit(t, y);
        let drift = (slope * (t[m - 1] - t[0])).abs();
        if drift > 3.0 * sd && drift > 1e-12 {
            warning = Some(format!("tail drifts by {drift:.3e} against scatter {sd:.3e}"));
        }
    }
    Ok(SteadyState {
        value,
        sd,
        n_points: m,
        warning,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Oscillation {
    /// Angular frequency from the spacing of same-kind extrema.
    pub omega: f64,
    /// Angular frequency of the largest non-DC periodogram bin.
    pub spectral_omega: f64,
    /// Complete cycles between the first and last detected extremum.
    pub periods: f64,
    pub n_extrema: usize,
}

/// Default hysteresis for [`oscillation_frequency`], relative to the range.
pub const DEFAULT_HYSTERESIS: f64 = 1e-6;

/// Dominant angular frequency of an oscillating curve.
///
/// Turning points are located with a hysteresis of 10⁻⁶ of the curve's
/// range and refined by a parabola through the neighbours; the estimate
/// is 2π over the mean spacing of consecutive maxima and of consecutive
/// minima. Use
/// [`oscillation_frequency_with`] to set an absolute hysteresis for noisy
/// curves.
pub fn oscillation_frequency(curve: &Curve) -> Result<Oscillation> {
    let (min, max) = curve
        .y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    oscillation_frequency_with(curve, DEFAULT_HYSTERESIS * (max - min))
}

pub fn oscillation_frequency_with(curve: &Curve, hysteresis: f64) -> Result<Oscillation> {
    let extrema = turning_points(&curve.y, hysteresis);
    // ≥ 3 half-cycles between turning points, i.e. at least 1.5 periods
    if extrema.len() < 4 {
        return Err(Error::Analysis("no oscillation".into()));
    }
    let times: Vec<f64> = extrema.iter().map(|&i| refine_extremum(curve, i)).collect();
    // same-kind spacing (max to max, min to min) is unbiased for damped and
    // offset oscillations, where maxima and minima are not equally spaced
    let full: Vec<f64> = times.windows(3).map(|w| w[2] - w[0]).collect();
    let period = full.iter().sum::<f64>() / full.len() as f64;
    let half_cycles = (times.len() - 1) as f64;
    Ok(Oscillation {
        omega: 2.0 * PI / period,
        spectral_omega: spectral_peak(curve),
        periods: half_cycles / 2.0,
        n_extrema: times.len(),
    })
}

/// Indices of alternating maxima and minima; a turning point is accepted
/// once the curve has moved away from it by more than `hysteresis`.
fn turning_points(y: &[f64], hysteresis: f64) -> Vec<usize> {
    let h = hysteresis.max(0.0);
    let mut out = Vec::new();
    // direction: +1 rising, −1 falling, 0 undecided
    let mut dir = 0i8;
    let (mut lo, mut hi) = (0usize, 0usize);
    for (i, &v) in y.iter().enumerate() {
        match dir {
            0 => {
                if v > y[hi] {
                    hi = i;
                }
                if v < y[lo] {
                    lo = i;
                }
                if v - y[lo] > h && lo < i {
                    out.push(lo);
                    dir = 1;
                    hi = i;
                } else if y[hi] - v > h && hi < i {
                    out.push(hi);
                    dir = -1;
                    lo = i;
                }
            }
            1 => {
                if v > y[hi] {
                    hi = i;
                } else if y[hi] - v > h {
                    out.push(hi);
                    dir = -1;
                    lo = i;
                }
            }
            _ => {
                if v < y[lo] {
                    lo = i;
                } else if v - y[lo] > h {
                    out.push(lo);
                    dir = 1;
                    hi = i;
                }
            }
        }
    }
    // a curve that starts at an extremum (e.g. sz(0) = 1) would otherwise
    // count its initial value; only interior points carry phase
    out.retain(|&i| i > 0 && i + 1 < y.len());
    out
}

fn refine_extremum(curve: &Curve, i: usize) -> f64 {
    let (t, y) = (&curve.t, &curve.y);
    let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
    let denom = y0 - 2.0 * y1 + y2;
    if denom == 0.0 {
        return t[i];
    }
    let shift = (0.5 * (y0 - y2) / denom).clamp(-0.5, 0.5);
    let h = if shift >= 0.0 { t[i + 1] - t[i] } else { t[i] - t[i - 1] };
    t[i] + shift * h
}

/// Peak of the Hann-windowed periodogram of the first difference, assuming
/// near-uniform sampling. Differencing suppresses the slow decay that
/// would otherwise own the lowest bins.
fn spectral_peak(curve: &Curve) -> f64 {
    let n = curve.len() - 1;
    let mut buf: Vec<Complex64> = (0..n)
        .map(|i| {
            let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos();
            Complex64::new(w * (curve.y[i + 1] - curve.y[i]), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let best = (1..n / 2 + 1)
        .max_by(|&a, &b| buf[a].norm_sqr().total_cmp(&buf[b].norm_sqr()))
        .unwrap_or(1);
    let dt = (curve.t[n - 1] - curve.t[0]) / (n - 1) as f64;
    2.0 * PI * best as f64 / (n as f64 * dt)
}

/// Metrics for one classical/quantum pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rate_classical: Option<f64>,
    pub rate_quantum: Option<f64>,
    pub steady_classical: Option<f64>,
    pub steady_quantum: Option<f64>,
    pub freq_classical: Option<f64>,
    pub freq_quantum: Option<f64>,
    pub max_dev: f64,
    pub rmse: f64,
    pub n_compared: usize,
}

impl ComparisonReport {
    /// Flat `key = value` lines; absent metrics are written as `none`.
    pub fn to_kv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| x.to_string());
        [
            ("rate_classical", opt(self.rate_classical)),
            ("rate_quantum", opt(self.rate_quantum)),
            ("steady_classical", opt(self.steady_classical)),
            ("steady_quantum", opt(self.steady_quantum)),
            ("freq_classical", opt(self.freq_classical)),
            ("freq_quantum", opt(self.freq_quantum)),
            ("max_dev", self.max_dev.to_string()),
            ("rmse", self.rmse.to_string()),
            ("n_compared", self.n_compared.to_string()),
        ]
        .iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
    }
}

/// Hysteresis for a curve with standard errors: four times the median error.
pub fn noise_hysteresis(curve: &Curve) -> Option<f64> {
    let mut e = curve.stderr.clone()?;
    e.sort_by(f64::total_cmp);
    Some(4.0 * e[e.len() / 2])
}

/// Decay rate of the oscillation envelope: −slope of ln(y − baseline) at
/// the interior maxima. Needs two maxima above the baseline.
pub fn envelope_decay_rate(curve: &Curve, baseline: f64) -> Result<f64> {
    let (min, max) = curve
        .y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    let h = match noise_hysteresis(curve) {
        Some(h) => h,
        None => DEFAULT_HYSTERESIS * (max - min),
    };
    let (t, ln): (Vec<f64>, Vec<f64>) = turning_points(&curve.y, h)
        .into_iter()
        .filter(|&i| curve.y[i] > curve.y[i - 1] && curve.y[i] - baseline > 0.0)
        .map(|i| (curve.t[i], (curve.y[i] - baseline).ln()))
        .unzip();
    if t.len() < 2 {
        return Err(Error::Analysis("fewer than two envelope maxima".into()));
    }
    Ok(-linear_fit(&t, &ln).0)
}

fn curve_metrics(c: &Curve) -> (Option<f64>, Option<f64>, Option<f64>) {
    let steady = steady_state(c, DEFAULT_TAIL_FRACTION).ok().map(|s| s.value);
    let rate = steady.and_then(|f| fit_decay_rate(c, f).ok()).map(|f| f.rate);
    let osc = match noise_hysteresis(c) {
        Some(h) => oscillation_frequency_with(c, h),
        None => oscillation_frequency(c),
    };
    (rate, steady, osc.ok().map(|o| o.omega))
}

/// Distances are taken on the union of both time grids inside their
/// overlap, each curve interpolated linearly, so they are symmetric in the
/// arguments.
pub fn compare(classical: &Curve, quantum: &Curve) -> Result<ComparisonReport> {
    let lo = classical.t[0].max(quantum.t[0]);
    let hi = classical.t[classical.len() - 1].min(quantum.t[quantum.len() - 1]);
    if hi < lo {
        return Err(Error::GridMismatch("curves do not overlap in time".into()));
    }
    let mut times: Vec<f64> = classical
        .t
        .iter()
        .chain(&quantum.t)
        .copied()
        .filter(|&t| t >= lo && t <= hi)
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let (mut max_dev, mut sq) = (0.0f64, 0.0);
    for &t in &times {
        let (Some(a), Some(b)) = (classical.at(t), quantum.at(t)) else {
            continue;
        };
        let d = (a - b).abs();
        max_dev = max_dev.max(d);
        sq += d * d;
    }
    let (rate_classical, steady_classical, freq_classical) = curve_metrics(classical);
    let (rate_quantum, steady_quantum, freq_quantum) = curve_metrics(quantum);
    Ok(ComparisonReport {
        rate_classical,
        rate_quantum,
        steady_classical,
        steady_quantum,
        freq_classical,
        freq_quantum,
        max_dev,
        rmse: (sq / times.len() as f64).sqrt(),
        n_compared: times.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ww::{high_t_decay, markovian_decay, HighTParams};

    fn grid(dt: f64, t_max: f64) -> TimeGrid {
        TimeGrid::covering(dt, t_max).unwrap()
    }

    #[test]
    fn curve_validation_and_interpolation() {
        assert!(Curve::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(Curve::new(vec![], vec![]).is_err());
        assert!(Curve::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        let c = Curve::new(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 0.0]).unwrap();
        assert_eq!(c.at(0.5), Some(1.0));
        assert_eq!(c.at(2.0), Some(1.0));
        assert_eq!(c.at(3.0), Some(0.0));
        assert_eq!(c.at(3.5), None);
    }

    #[test]
    fn exponential_rate_is_exact() {
        let c = Curve::from_fn(&grid(0.01, 60.0), |t| markovian_decay(0.1, t));
        let fit = fit_decay_rate(&c, -1.0).unwrap();
        assert!((fit.rate - 0.1).abs() < 1e-6);
        assert!(fit.residual < 1e-9);
        assert!((fit.window.0 - 10.0 * (1.0f64 / 0.9).ln()).abs() < 0.011);
    }

    #[test]
    fn thermal_rate_against_its_floor() {
        let p = HighTParams::new(39.5, 0.01).unwrap();
        let c = Curve::from_fn(&grid(0.001, 5.0), |t| high_t_decay(&p, t));
        let fit = fit_decay_rate(&c, p.steady_state()).unwrap();
        assert!((fit.rate - 0.8).abs() < 1e-4, "{}", fit.rate);
    }

    #[test]
    fn fit_needs_enough_points() {
        let c = Curve::from_fn(&grid(2.0, 30.0), |t| markovian_decay(0.1, t));
        assert!(fit_decay_rate(&c, -1.0).is_err());
        let flat = Curve::from_fn(&grid(0.1, 30.0), |_| 1.0);
        assert!(fit_decay_rate(&flat, -1.0).is_err());
        assert!(fit_decay_rate(&flat, 1.0).is_err());
    }

    #[test]
    fn plateau_examples() {
        let c = Curve::from_fn(&grid(0.1, 50.0), |_| 0.25);
        let s = steady_state(&c, 0.2).unwrap();
        assert_eq!(s.value, 0.25);
        assert_eq!(s.sd, 0.0);
        assert!(s.warning.is_none());

        let c = Curve::from_fn(&grid(0.01, 100.0), |t| markovian_decay(0.1, t));
        let s = steady_state(&c, 0.2).unwrap();
        assert!((s.value + 1.0).abs() < 1e-3);

        let ramp = Curve::from_fn(&grid(0.1, 10.0), |t| t);
        assert!(steady_state(&ramp, 0.2).unwrap().warning.is_some());
        assert!(steady_state(&ramp, 0.0).is_err());
    }

    #[test]
    fn sinusoid_frequency() {
        let c = Curve::from_fn(&grid(0.01, 20.0), |t| (2.0 * t).sin());
        let o = oscillation_frequency(&c).unwrap();
        assert!((o.omega - 2.0).abs() < 0.02, "{}", o.omega);
        assert!((o.spectral_omega - 2.0).abs() < 0.4, "{}", o.spectral_omega);
        assert!(o.periods >= 5.0);
    }

    #[test]
    fn monotone_curves_do_not_oscillate() {
        let c = Curve::from_fn(&grid(0.01, 50.0), |t| markovian_decay(0.1, t));
        assert!(oscillation_frequency(&c).is_err());
    }

    #[test]
    fn decaying_oscillation_keeps_its_frequency() {
        let c = Curve::from_fn(&grid(0.05, 400.0), |t| {
            2.0 * (-0.025 * t).exp() * (0.0328 * t).cos().powi(2) - 1.0
        });
        let o = oscillation_frequency(&c).unwrap();
        assert!((o.omega - 0.0656).abs() < 0.001, "{}", o.omega);
        assert!((o.spectral_omega - 0.0656).abs() < 0.01, "{}", o.spectral_omega);
        assert!(o.periods >= 2.5);
        let rate = envelope_decay_rate(&c, -1.0).unwrap();
        assert!((rate - 0.025).abs() < 1e-3, "{rate}");
    }

    #[test]
    fn noisy_extrema_need_hysteresis() {
        // small jitter on a slow sinusoid: raw turning points are spurious
        let c = Curve::from_fn(&grid(0.01, 30.0), |t| (0.5 * t).sin() + 0.01 * (97.0 * t).sin());
        let o = oscillation_frequency_with(&c, 0.1).unwrap();
        assert!((o.omega - 0.5).abs() < 0.02, "{}", o.omega);
    }

    #[test]
    fn comparison_distances() {
        let g = grid(0.01, 30.0);
        let a = Curve::from_fn(&g, |t| markovian_decay(0.1, t));
        let r = compare(&a, &a).unwrap();
        assert_eq!((r.max_dev, r.rmse), (0.0, 0.0));
        assert!((r.rate_classical.unwrap() - r.rate_quantum.unwrap()).abs() < 1e-12);

        let b = Curve::from_fn(&g, |t| markovian_decay(0.1, t) + 0.02);
        let r = compare(&a, &b).unwrap();
        assert!((r.max_dev - 0.02).abs() < 1e-12);
        assert!((r.rmse - 0.02).abs() < 1e-12);
        assert!(r.freq_classical.is_none());
    }

    #[test]
    fn comparison_needs_overlap() {
        let a = Curve::new(vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        let b = Curve::new(vec![2.0, 3.0], vec![1.0, 0.0]).unwrap();
        assert!(compare(&a, &b).is_err());
    }

    #[test]
    fn report_is_flat_key_value() {
        let a = Curve::from_fn(&grid(0.01, 30.0), |t| markovian_decay(0.1, t));
        let kv = compare(&a, &a).unwrap().to_kv();
        assert!(kv.lines().all(|l| l.split(" = ").count() == 2));
        assert!(kv.contains("freq_quantum = none"));
    }
}
