//! Bath coupling model: Lorentzian spectral density, noise power spectra,
//! memory kernels and the derived time scales used to classify a run as
//! Markovian or not.
//!
//! Units throughout are ħ = γ = k_B = 1.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Lorentzian coupling of the spin's x-component to an oscillator bath.
///
/// `omega0` is the resonance, `gamma` the spectral width Γ and `alpha` the
/// coupling strength entering through the anisotropy `diag(√α, 0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianCoupling {
    omega0: f64,
    gamma: f64,
    alpha: f64,
}

impl LorentzianCoupling {
    pub fn new(omega0: f64, gamma: f64, alpha: f64) -> Result<Self> {
        if !(omega0.is_finite() && omega0 > 0.0) {
            return Err(invalid("omega0", format!("must be finite and > 0, got {omega0}")));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(invalid("gamma", format!("must be finite and > 0, got {gamma}")));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(invalid("alpha", format!("must be finite and >= 0, got {alpha}")));
        }
        Ok(Self {
            omega0,
            gamma,
            alpha,
        })
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Same spectral shape with a different coupling strength.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.omega0, self.gamma, alpha)
    }

    /// Memory decay time τ_K = 2/Γ.
    pub fn memory_time(&self) -> f64 {
        2.0 / self.gamma
    }

    /// Decay rate λ = α / (2Γω₀) of the excitation probability.
    pub fn decay_rate(&self) -> f64 {
        self.alpha / (2.0 * self.gamma * self.omega0)
    }

    /// Slowest exponential rate present in the memory kernel. Equals Γ/2
    /// unless the kernel is overdamped, where the slow mode decays at
    /// Γ/2 − ν.
    pub fn slowest_kernel_rate(&self) -> f64 {
        let half = 0.5 * self.gamma;
        let d = self.omega0 * self.omega0 - half * half;
        if d >= 0.0 {
            half
        } else {
            // Γ/2 − ν written without cancellation.
            self.omega0 * self.omega0 / (half + (-d).sqrt())
        }
    }

    pub fn kernel_form(&self) -> KernelForm {
        KernelForm::of(self)
    }
}

/// c_ω² = (2Γ/π) ω² / ((ω₀² − ω²)² + ω²Γ²).
pub fn coupling_density_sq(c: &LorentzianCoupling, omega: f64) -> Result<f64> {
    if !(omega >= 0.0) {
        return Err(invalid("omega", format!("must be >= 0, got {omega}")));
    }
    Ok(density_sq(c, omega))
}

#[inline]
fn density_sq(c: &LorentzianCoupling, omega: f64) -> f64 {
    let w2 = omega * omega;
    let detune = c.omega0 * c.omega0 - w2;
    2.0 * c.gamma / PI * w2 / (detune * detune + w2 * c.gamma * c.gamma)
}

/// c_ω²/ω, the weight appearing in both kernels. Smooth and odd in ω.
#[inline]
fn density_over_omega(c: &LorentzianCoupling, omega: f64) -> f64 {
    let w2 = omega * omega;
    let detune = c.omega0 * c.omega0 - w2;
    2.0 * c.gamma / PI * omega / (detune * detune + w2 * c.gamma * c.gamma)
}

/// Noise power spectrum family. Each variant carries the bath temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpectrumKind {
    /// π c²/(2ω) · coth(ω/2T): zero-point plus thermal fluctuations.
    QuantumZeroPoint { temperature: f64 },
    /// π T/ω²: purely thermal, vanishes at T = 0.
    ClassicalLinear { temperature: f64 },
    /// π c²/(2ω) · (coth(ω/2T) − 1): zero-point part removed.
    QuantumNoZeroPoint { temperature: f64 },
}

impl SpectrumKind {
    pub fn temperature(&self) -> f64 {
        match *self {
            SpectrumKind::QuantumZeroPoint { temperature }
            | SpectrumKind::ClassicalLinear { temperature }
            | SpectrumKind::QuantumNoZeroPoint { temperature } => temperature,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.temperature();
        if !(t.is_finite() && t >= 0.0) {
            return Err(invalid("temperature", format!("must be finite and >= 0, got {t}")));
        }
        Ok(())
    }

    /// True when the spectrum is identically zero.
    pub fn is_silent(&self) -> bool {
        match *self {
            SpectrumKind::QuantumZeroPoint { .. } => false,
            SpectrumKind::ClassicalLinear { temperature }
            | SpectrumKind::QuantumNoZeroPoint { temperature } => temperature == 0.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SpectrumKind::QuantumZeroPoint { .. } => "quantum",
            SpectrumKind::ClassicalLinear { .. } => "classical",
            SpectrumKind::QuantumNoZeroPoint { .. } => "quantum-no-zero-point",
        }
    }
}

/// Power spectrum P(ω), evaluated on |ω| so the filter is even.
///
/// The ω = 0 value is the analytic limit: 2ΓT/ω₀⁴ for both quantum
/// variants and 0 (clamped, DC excluded) for the classical one.
pub fn power_spectrum(kind: &SpectrumKind, c: &LorentzianCoupling, omega: f64) -> f64 {
    let w = omega.abs();
    let t = kind.temperature();
    if w == 0.0 {
        return match kind {
            SpectrumKind::ClassicalLinear { .. } => 0.0,
            _ => 2.0 * c.gamma * t / c.omega0.powi(4),
        };
    }
    match kind {
        SpectrumKind::QuantumZeroPoint { .. } => {
            let zp = 0.5 * PI * density_over_omega(c, w);
            if t == 0.0 {
                zp
            } else {
                zp / (0.5 * w / t).tanh()
            }
        }
        SpectrumKind::ClassicalLinear { .. } => PI * t / (w * w),
        SpectrumKind::QuantumNoZeroPoint { .. } => {
            if t == 0.0 {
                0.0
            } else {
                // coth(x/2) − 1 = 2/(eˣ − 1)
                0.5 * PI * density_over_omega(c, w) * 2.0 / (w / t).exp_m1()
            }
        }
    }
}

/// Bose occupation n̄ = 1/(e^{ω/T} − 1); zero at T = 0.
pub fn mean_occupation(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        0.0
    } else {
        1.0 / (omega / temperature).exp_m1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelBranch {
    Underdamped,
    Critical,
    Overdamped,
}

/// Shape of the damped-oscillator memory kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelForm {
    pub branch: KernelBranch,
    /// √|ω₀² − Γ²/4|
    pub omega: f64,
}

impl KernelForm {
    pub fn of(c: &LorentzianCoupling) -> Self {
        let d = c.omega0 * c.omega0 - 0.25 * c.gamma * c.gamma;
        let branch = if d > 0.0 {
            KernelBranch::Underdamped
        } else if d < 0.0 {
            KernelBranch::Overdamped
        } else {
            KernelBranch::Critical
        };
        KernelForm {
            branch,
            omega: d.abs().sqrt(),
        }
    }
}

/// Impulse response of ü + Γu̇ + ω₀²u and its time derivative at τ ≥ 0.
///
/// All branches share one evaluation: with d = ω₀² − Γ²/4 the kernel is
/// e^{−Γτ/2}·τ·f(dτ²) where f(x) = sin(√x)/√x continued to x ≤ 0. A series
/// is used near the critical point so the result is smooth in Γ.
pub(crate) fn kernel_and_derivative(c: &LorentzianCoupling, tau: f64) -> (f64, f64) {
    if tau <= 0.0 {
        return (0.0, if tau == 0.0 { 1.0 } else { 0.0 });
    }
    let half = 0.5 * c.gamma;
    let d = c.omega0 * c.omega0 - half * half;
    let u = d * tau * tau;
    // s = e^{−Γτ/2}·sin(Ωτ)/Ω, q = e^{−Γτ/2}·cos(Ωτ) (hyperbolic when d < 0)
    let (s, q) = if u.abs() < 1e-3 {
        let env = (-half * tau).exp();
        let sinc = 1.0 - u / 6.0 * (1.0 - u / 20.0 * (1.0 - u / 42.0));
        let cosc = 1.0 - u / 2.0 * (1.0 - u / 12.0 * (1.0 - u / 30.0));
        (env * tau * sinc, env * cosc)
    } else if d > 0.0 {
        let omega = d.sqrt();
        let env = (-half * tau).exp();
        let (sn, cs) = (omega * tau).sin_cos();
        (env * sn / omega, env * cs)
    } else {
        let nu = (-d).sqrt();
        let slow = c.omega0 * c.omega0 / (half + nu);
        let fast = half + nu;
        let es = (-slow * tau).exp();
        let ef = (-fast * tau).exp();
        ((es - ef) / (2.0 * nu), 0.5 * (es + ef))
    };
    (s, q - half * s)
}

/// Closed-form memory kernel k(τ) = Θ(τ)·e^{−Γτ/2}·sin(Ωτ)/Ω with the
/// sinh and linear continuations for Γ > 2ω₀ and Γ = 2ω₀.
///
/// This is the scalar part; the field it generates is scaled by α.
pub fn memory_kernel_closed(c: &LorentzianCoupling, tau: f64) -> f64 {
    if tau <= 0.0 {
        0.0
    } else {
        kernel_and_derivative(c, tau).0
    }
}

/// Scale for relative kernel errors: e^{−Γτ/2}·min(τ, 1/Ω) when the kernel
/// oscillates (it has zeros there), |k(τ)| otherwise.
pub fn memory_kernel_envelope(c: &LorentzianCoupling, tau: f64) -> f64 {
    let form = c.kernel_form();
    match form.branch {
        KernelBranch::Underdamped if tau > 0.0 => (-0.5 * c.gamma * tau).exp() * tau.min(1.0 / form.omega),
        _ => memory_kernel_closed(c, tau).abs(),
    }
}

/// Frequency cutoff and sample count for a trapezoid quadrature over [0, ω_max].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub omega_max: f64,
    pub n_points: usize,
}

/// Absolute tail tolerance used when sizing ω_max.
const TAIL_TOLERANCE: f64 = 1e-11;
/// Aliasing margin, in units of the slowest kernel decay time.
const ALIAS_MARGIN: f64 = 30.0;

impl QuadratureRule {
    /// Rule resolving the kernel integrand at lag `tau`.
    ///
    /// ω_max covers 50 ω₀ and 50 Γ and pushes the truncated tail below
    /// 1e-11; the spacing resolves the Lorentzian (50 points per Γ and
    /// per ω₀), the oscillation e^{iωτ} (10 points per period) and keeps
    /// periodic images of the kernel 30 decay times away.
    pub fn for_kernel(c: &LorentzianCoupling, tau: f64) -> Self {
        let tau = tau.abs();
        let amp = 2.0 * c.gamma / PI;
        let tail_cut = if tau > 0.0 {
            (amp / (tau * TAIL_TOLERANCE)).cbrt()
        } else {
            (amp / (2.0 * TAIL_TOLERANCE)).sqrt()
        };
        let omega_max = (50.0 * c.omega0).max(50.0 * c.gamma).max(tail_cut.min(1e7));
        let mut h = (c.gamma / 50.0).min(c.omega0 / 50.0);
        if tau > 0.0 {
            h = h.min(2.0 * PI / (10.0 * tau));
        }
        h = h.min(2.0 * PI / (tau + ALIAS_MARGIN / c.slowest_kernel_rate()));
        let n_points = (omega_max / h).ceil() as usize;
        QuadratureRule {
            omega_max,
            n_points: n_points.max(2),
        }
    }

    fn check(&self, c: &LorentzianCoupling) -> Result<()> {
        let floor = 10.0 * c.omega0.max(c.gamma);
        if !(self.omega_max >= floor) {
            return Err(Error::Quadrature(format!(
                "omega_max = {} is below 10·max(omega0, gamma) = {floor}",
                self.omega_max
            )));
        }
        if self.n_points < 2 {
            return Err(Error::Quadrature("need at least 2 intervals".into()));
        }
        Ok(())
    }
}

/// A quadrature result with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureValue<T> {
    pub value: T,
    /// Discretization (half-resolution difference) plus truncated-tail bound.
    pub error_estimate: f64,
}

fn tail_bound(c: &LorentzianCoupling, omega_max: f64, tau: f64) -> f64 {
    let amp = 2.0 * c.gamma / PI;
    let flat = 0.5 * amp / (omega_max * omega_max);
    if tau > 0.0 {
        flat.min(amp / (tau * omega_max.powi(3)))
    } else {
        flat
    }
}

/// Trapezoid sums over [0, ω_max] at n and n/2 intervals.
fn trapezoid_pair<T, F>(omega_max: f64, n_points: usize, f: F) -> (T, T)
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
    F: Fn(f64) -> T,
{
    let n = n_points + (n_points & 1);
    let h = omega_max / n as f64;
    let mut even = T::default();
    let mut odd = T::default();
    for j in 1..n {
        let v = f(j as f64 * h);
        if j & 1 == 0 {
            even = even + v;
        } else {
            odd = odd + v;
        }
    }
    let ends = (f(0.0) + f(omega_max)) * 0.5;
    let fine = (ends + even + odd) * h;
    let coarse = (ends + even) * (2.0 * h);
    (fine, coarse)
}

/// Numerical k(τ) = ∫₀^{ω_max} (c_ω²/ω) sin(ωτ) dω by composite trapezoid.
///
/// Independent of [`memory_kernel_closed`]; the integrand is even and
/// analytic so the trapezoid sum converges spectrally.
pub fn memory_kernel_quadrature(
    c: &LorentzianCoupling,
    tau: f64,
    omega_max: f64,
    n_points: usize,
) -> Result<QuadratureValue<f64>> {
    let rule = QuadratureRule {
        omega_max,
        n_points,
    };
    rule.check(c)?;
    if tau == 0.0 {
        return Ok(QuadratureValue {
            value: 0.0,
            error_estimate: 0.0,
        });
    }
    let (fine, coarse) = trapezoid_pair(omega_max, n_points, |w| {
        density_over_omega(c, w) * (w * tau).sin()
    });
    Ok(QuadratureValue {
        value: fine,
        error_estimate: (fine - coarse).abs() + tail_bound(c, omega_max, tau),
    })
}

/// Complex accumulator so `trapezoid_pair` can sum `Complex64`.
#[derive(Clone, Copy, Default)]
struct Cx(Complex64);

impl std::ops::Add for Cx {
    type Output = Cx;
    fn add(self, o: Cx) -> Cx {
        Cx(self.0 + o.0)
    }
}

impl std::ops::Mul<f64> for Cx {
    type Output = Cx;
    fn mul(self, s: f64) -> Cx {
        Cx(self.0 * s)
    }
}

/// Slope of c_ω²/ω at ω = 0, used for the Euler-Maclaurin endpoint term.
fn density_over_omega_slope0(c: &LorentzianCoupling) -> f64 {
    2.0 * c.gamma / (PI * c.omega0.powi(4))
}

/// Weisskopf-Wigner kernel K(τ) = (α/8) ∫₀^{ω_max} (c_ω²/ω) e^{i(ω₀−ω)τ} dω.
pub fn ww_kernel(
    c: &LorentzianCoupling,
    tau: f64,
    omega_max: f64,
    n_points: usize,
) -> Result<QuadratureValue<Complex64>> {
    let rule = QuadratureRule {
        omega_max,
        n_points,
    };
    rule.check(c)?;
    let pre = c.alpha / 8.0;
    if pre == 0.0 {
        return Ok(QuadratureValue {
            value: Complex64::new(0.0, 0.0),
            error_estimate: 0.0,
        });
    }
    let (fine, coarse) = trapezoid_pair(omega_max, n_points, |w| {
        Cx(Complex64::from_polar(density_over_omega(c, w), -w * tau))
    });
    let n = n_points + (n_points & 1);
    let h = omega_max / n as f64;
    // trapezoid − integral ≈ −(h²/12)·f'(0) at the lower end
    let slope = density_over_omega_slope0(c);
    let fine = fine.0 + h * h / 12.0 * slope;
    let coarse = coarse.0 + h * h / 3.0 * slope;
    let phase = Complex64::from_polar(pre, c.omega0 * tau);
    Ok(QuadratureValue {
        value: phase * fine,
        error_estimate: pre * ((fine - coarse).norm() + tail_bound(c, omega_max, tau)),
    })
}

/// K(τ) tabulated at τ_k = k·dt for k < n.
#[derive(Debug, Clone)]
pub struct WwKernelTable {
    pub dt: f64,
    pub values: Vec<Complex64>,
    /// Frequency spacing of the underlying trapezoid rule.
    pub d_omega: f64,
    /// Upper end of the frequency grid actually summed.
    pub omega_max: f64,
}

/// Tabulates the WW kernel on a uniform lag grid.
///
/// Same trapezoid rule as [`ww_kernel`], summed for all lags at once with
/// an FFT: the frequency spacing is chosen as 2π/(M·dτ) so FFT bin k lands
/// exactly on τ = k·dτ. When 2π/dt does not reach the required cutoff the
/// lag grid is refined by an integer factor and decimated afterwards.
pub fn ww_kernel_table(c: &LorentzianCoupling, dt: f64, n: usize) -> Result<WwKernelTable> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(invalid("dt", format!("must be > 0, got {dt}")));
    }
    // c²/ω ~ (2Γ/π)/ω³, so the truncated tail is about (Γ/π)/ω_max²
    let omega_tail = (c.gamma / PI / 1e-9).sqrt();
    let omega_req = (50.0 * c.omega0).max(50.0 * c.gamma).max(omega_tail);
    let stride = ((omega_req * dt / (2.0 * PI)).ceil() as usize).max(1);
    let dtau = dt / stride as f64;
    let span = n.saturating_sub(1) as f64 * dt + ALIAS_MARGIN / c.slowest_kernel_rate();
    let h_max = (c.gamma / 50.0).min(c.omega0 / 50.0);
    let m_needed = (span / dtau).max(2.0 * PI / (h_max * dtau)).ceil() as usize;
    let m = m_needed.max(n * stride).next_power_of_two();
    if m > 1 << 27 {
        return Err(Error::Quadrature(format!(
            "kernel table needs {m} frequency samples; increase dt or shorten the horizon"
        )));
    }
    let h = 2.0 * PI / (m as f64 * dtau);
    let mut buf: Vec<Complex64> = (0..m)
        .map(|j| Complex64::new(density_over_omega(c, j as f64 * h), 0.0))
        .collect();
    buf[m - 1] *= 0.5;
    FftPlanner::<f64>::new().plan_fft_forward(m).process(&mut buf);
    let pre = c.alpha / 8.0;
    let endpoint = h * h / 12.0 * density_over_omega_slope0(c);
    let values = (0..n)
        .map(|k| {
            let tau = k as f64 * dt;
            // buf already carries weight 1 at j = 0 where the trapezoid wants ½,
            // but c²/ω vanishes there.
            let integral = buf[k * stride] * h + endpoint;
            Complex64::from_polar(pre, c.omega0 * tau) * integral
        })
        .collect();
    Ok(WwKernelTable {
        dt,
        values,
        d_omega: h,
        omega_max: (m - 1) as f64 * h,
    })
}

/// Time scales and Markovianity parameters of a coupling at temperature T.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub lambda: f64,
    /// τ_φ/τ_K; `None` when α = 0 (no coupling, μ infinite).
    pub mu0: Option<f64>,
    /// 2Γ²ω₀/(α coth(ω₀/2T)); `None` when α = 0.
    pub mu_t: Option<f64>,
    pub tau_k: f64,
    /// 2/λ, infinite when α = 0.
    pub tau_phi: f64,
    /// Thermal amplitude decay time 2/((2n̄+1)λ).
    pub tau_psi: f64,
    pub nbar: f64,
}

pub fn regime_report(c: &LorentzianCoupling, temperature: f64) -> Result<RegimeReport> {
    if !(temperature.is_finite() && temperature >= 0.0) {
        return Err(invalid("temperature", format!("must be >= 0, got {temperature}")));
    }
    let lambda = c.decay_rate();
    let tau_k = c.memory_time();
    let nbar = mean_occupation(c.omega0, temperature);
    let tau_phi = 2.0 / lambda;
    let tau_psi = 2.0 / ((2.0 * nbar + 1.0) * lambda);
    let (mu0, mu_t) = if c.alpha == 0.0 {
        (None, None)
    } else {
        let mu0 = tau_phi / tau_k;
        let mu_t = if temperature == 0.0 {
            mu0
        } else {
            2.0 * c.gamma * c.gamma * c.omega0 * (0.5 * c.omega0 / temperature).tanh() / c.alpha
        };
        (Some(mu0), Some(mu_t))
    };
    Ok(RegimeReport {
        lambda,
        mu0,
        mu_t,
        tau_k,
        tau_phi,
        tau_psi,
        nbar,
    })
}
