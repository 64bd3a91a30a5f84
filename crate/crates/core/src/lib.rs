//! A classical spin-1/2 driven by colored quantum noise through a
//! Lorentzian bath, integrated as a Heisenberg-Langevin equation with
//! memory, and the quantum curves it is measured against.
//!
//! Start with the examples, one per capability:
//!
//! | example | shows |
//! |---|---|
//! | `kernel_oracle` | memory kernel, closed form against quadrature |
//! | `noise_spectrum` | spectral synthesis of the bath noise |
//! | `single_trajectories` | individual stochastic realizations |
//! | `markovian_ensemble` | ensemble decay and the −0.31 plateau |
//! | `volterra_reference` | amplitude equation, Markovian and oscillating |
//! | `high_temperature` | thermal decay and μ_T |
//! | `frozen_dynamics` | spectra without zero-point noise |
//! | `compare_curves` | comparison report and SVG figure |
//! | `config_run` | config file to output directory |
//!
//! Units: ħ = k_B = γ = 1.

pub mod error;
pub mod model;
pub mod noise;
pub mod hl;
pub mod ww;
pub mod analysis;
pub mod config;
pub mod plot;
pub mod acceptance;
pub mod experiment;

pub use error::{Error, Result};
