use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The energy sits (numerically) on the spectrum of the finite-volume operator.
    #[error("energy {energy} is within {distance:e} of the spectrum (threshold {threshold:e})")]
    NearSingular {
        energy: f64,
        distance: f64,
        threshold: f64,
    },

    #[error("symmetric eigensolver failed to converge on a {0}x{0} matrix")]
    EigenSolver(usize),

    #[error("region is not contained in the enclosing box: {0}")]
    NotContained(String),

    #[error("annulus cannot carry a coarse shell: {0}")]
    DegenerateAnnulus(String),

    #[error("extracted shell violates its invariants: {0}")]
    ShellInvariantViolated(String),

    #[error(
        "no admissible N2 for rho={rho}: best (N2+1)*rho^N2 = {best} is not below p0-p = {gap}"
    )]
    InfeasibleConstants { rho: f64, best: f64, gap: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
