use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates its domain (e.g. Γ ≤ 0).
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Quadrature settings cannot resolve the integrand.
    #[error("quadrature setup rejected: {0}")]
    Quadrature(String),

    /// Synthesized noise failed the Hermitian-symmetry check.
    #[error("noise filter produced complex output (imaginary residue {residue:e} relative)")]
    NoiseSymmetry { residue: f64 },

    /// Spin norm drifted off the Bloch sphere.
    #[error("spin norm drift {drift:e} at step {step} exceeds tolerance")]
    NormDrift { step: usize, drift: f64 },

    /// Volterra amplitude grew beyond 1 (step size too large).
    #[error("Volterra amplitude |phi| = {magnitude} at t = {t} exceeds 1 + 1e-3; reduce dt")]
    VolterraUnstable { t: f64, magnitude: f64 },

    /// Series or grids are not compatible.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A curve does not satisfy an analysis precondition.
    #[error("analysis failed: {0}")]
    Analysis(String),

    /// Configuration file problems, with line number when available.
    #[error("config error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },

    #[error("empty series: {0}")]
    EmptySeries(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Process exit status for a failed run.
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_ACCEPTANCE: i32 = 3;

impl Error {
    /// Bad input maps to 1, failures during the computation to 2.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. } | Error::Config { .. } | Error::Io(_) | Error::Json(_) => {
                EXIT_VALIDATION
            }
            Error::Quadrature(_)
            | Error::NoiseSymmetry { .. }
            | Error::NormDrift { .. }
            | Error::VolterraUnstable { .. }
            | Error::GridMismatch(_)
            | Error::Analysis(_)
            | Error::EmptySeries(_) => EXIT_NUMERICAL,
        }
    }
}
