use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::kernel::ScalarFunction;

pub type Result<T> = core::result::Result<T, Error>;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The assembled Gram matrix is not positive semi-definite.
    #[error("kernel is not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    InvalidKernel { min_eigenvalue: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("degenerate compression: gamma* k(z,z) gamma = {denominator:e} is below {threshold:e}")]
    DegenerateCompression { denominator: f64, threshold: f64 },

    /// The function is not a multiplier of the reproducing space: part of
    /// `Δ_f K` falls outside the range of `K`.
    #[error("unbounded multiplier: range defect {defect:e} exceeds {threshold:e}")]
    UnboundedMultiplier { defect: f64, threshold: f64 },

    #[error("numerical failure: {message} (bounds [{lower:e}, {upper:e}])")]
    NumericalFailure {
        message: String,
        lower: f64,
        upper: f64,
    },

    /// No grid value of the annulus parameter produced a rank-one ratio.
    #[error("compression fit failed: best residual {best_residual:e}")]
    FitFailure {
        best_residual: f64,
        profile: Vec<(f64, f64)>,
    },

    /// The feasible region at `point` came out empty.
    #[error("extension failed at point {point}: worst margins {worst_margins:?}")]
    ExtensionFailure {
        point: String,
        partial: Box<ScalarFunction>,
        worst_margins: Vec<f64>,
    },

    /// Every generator vanishes on the diagonal at this point.
    #[error("degenerate point {0}: no generator has k(z,z) != 0")]
    DegeneratePoint(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Stable machine-readable code used by front ends.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::InvalidKernel { .. } => "invalid-kernel",
            Error::PreconditionViolated(_) => "precondition-violated",
            Error::DegenerateCompression { .. } => "degenerate-compression",
            Error::UnboundedMultiplier { .. } => "unbounded-multiplier",
            Error::NumericalFailure { .. } => "numerical-failure",
            Error::FitFailure { .. } => "fit-failure",
            Error::ExtensionFailure { .. } => "extension-failure",
            Error::DegeneratePoint(_) => "degenerate-point",
        }
    }
}
