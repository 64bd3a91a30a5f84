//! Quantum reference curves: the zero-temperature Weisskopf-Wigner
//! amplitude equation with the Lorentzian kernel, its Markovian limit and
//! the high-temperature rate-equation decay.

use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::Curve;
use crate::error::{invalid, Error, Result};
use crate::model::{ww_kernel_table, LorentzianCoupling};
use crate::noise::TimeGrid;

pub use crate::model::mean_occupation;

/// Largest |φ| accepted before the solve is declared unstable.
pub const AMPLITUDE_LIMIT: f64 = 1.0 + 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VolterraStepper {
    /// Forward Euler with a left-endpoint history sum.
    Euler,
    /// Trapezoid in time and in the history sum (implicit in φ_{k+1}).
    Trapezoid,
}

impl VolterraStepper {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Euler => "euler",
            Self::Trapezoid => "trapezoid",
        }
    }
}

impl FromStr for VolterraStepper {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "euler" => Ok(Self::Euler),
            "trapezoid" => Ok(Self::Trapezoid),
            _ => Err(format!("unknown stepper `{s}` (expected euler or trapezoid)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolterraSolution {
    pub grid: TimeGrid,
    pub phi: Vec<Complex64>,
    pub sz: Vec<f64>,
}

impl VolterraSolution {
    pub fn curve(&self) -> Curve {
        Curve::from_grid(&self.grid, self.sz.clone())
    }
}

/// 2|φ|² − 1.
pub fn sz_from_amplitude(phi: Complex64) -> f64 {
    2.0 * phi.norm_sqr() - 1.0
}

/// Solves φ̇ = −∫₀^t K(t−t′)φ(t′)dt′, φ(0) = 1, on `grid`.
///
/// K is tabulated once on the grid. Cost is O(N²) in the number of steps.
pub fn solve_volterra(
    c: &LorentzianCoupling,
    grid: &TimeGrid,
    stepper: VolterraStepper,
) -> Result<VolterraSolution> {
    let n = grid.len();
    let dt = grid.dt();
    let kernel = ww_kernel_table(c, dt, n)?.values;
    let mut phi = Vec::with_capacity(n);
    phi.push(Complex64::new(1.0, 0.0));
    // history integral at t_k, needed by the trapezoid stepper
    let mut rate = Complex64::new(0.0, 0.0);
    let implicit = 1.0 / (1.0 + 0.25 * dt * dt * kernel[0]);
    for k in 0..n - 1 {
        let next = match stepper {
            VolterraStepper::Euler => {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..k {
                    acc += kernel[k - j] * phi[j];
                }
                phi[k] - dt * dt * acc
            }
            VolterraStepper::Trapezoid => {
                // everything in I_{k+1} except the ½K(0)φ_{k+1} term
                let mut acc = 0.5 * kernel[k + 1] * phi[0];
                for j in 1..=k {
                    acc += kernel[k + 1 - j] * phi[j];
                }
                let partial = dt * acc;
                let next = (phi[k] - 0.5 * dt * (rate + partial)) * implicit;
                rate = partial + 0.5 * dt * kernel[0] * next;
                next
            }
        };
        let magnitude = next.norm();
        if !(magnitude <= AMPLITUDE_LIMIT) {
            return Err(Error::VolterraUnstable {
                t: grid.time(k + 1),
                magnitude,
            });
        }
        phi.push(next);
    }
    let sz = phi.iter().map(|&p| sz_from_amplitude(p)).collect();
    Ok(VolterraSolution {
        grid: *grid,
        phi,
        sz,
    })
}

/// 2e^{−λt} − 1.
pub fn markovian_decay(lambda: f64, t: f64) -> f64 {
    2.0 * (-lambda * t).exp() - 1.0
}

/// Bath occupation n̄ and zero-temperature rate λ of the thermal decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HighTParams {
    pub nbar: f64,
    pub lambda: f64,
}

impl HighTParams {
    pub fn new(nbar: f64, lambda: f64) -> Result<Self> {
        if !(nbar.is_finite() && nbar >= 0.0) {
            return Err(invalid("nbar", format!("must be >= 0, got {nbar}")));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(invalid("lambda", format!("must be >= 0, got {lambda}")));
        }
        Ok(Self { nbar, lambda })
    }

    pub fn for_coupling(c: &LorentzianCoupling, temperature: f64) -> Result<Self> {
        if !(temperature.is_finite() && temperature >= 0.0) {
            return Err(invalid("temperature", format!("must be >= 0, got {temperature}")));
        }
        Self::new(mean_occupation(c.omega0(), temperature), c.decay_rate())
    }

    /// (2n̄ + 1)λ.
    pub fn rate(&self) -> f64 {
        (2.0 * self.nbar + 1.0) * self.lambda
    }

    /// −1/(2n̄ + 1).
    pub fn steady_state(&self) -> f64 {
        -1.0 / (2.0 * self.nbar + 1.0)
    }
}

/// (2(n̄+1)/(2n̄+1))·e^{−(2n̄+1)λt} − 1/(2n̄+1).
pub fn high_t_decay(p: &HighTParams, t: f64) -> f64 {
    let g = 2.0 * p.nbar + 1.0;
    2.0 * (p.nbar + 1.0) / g * (-p.rate() * t).exp() - 1.0 / g
}
