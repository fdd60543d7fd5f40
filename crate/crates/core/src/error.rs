use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("beta = {beta} lies outside the admissible range ({lo}, {hi})")]
    BetaOutOfRange { beta: f64, lo: f64, hi: f64 },

    #[error("beta must be nonzero")]
    BetaZero,

    #[error("refinement stalled: last difference {last_diff:.3e} above tolerance {tol:.3e}")]
    ToleranceNotMet { last_diff: f64, tol: f64 },

    #[error("profile grid does not match the operator grid ({expected} nodes expected, got {got})")]
    GridMismatch { expected: usize, got: usize },

    #[error("no sign change found while scanning [{lo}, {hi}]: {scan}")]
    RootNotBracketed { lo: f64, hi: f64, scan: String },

    #[error("iteration did not converge after {iterations} steps (last interval [{lo:.6e}, {hi:.6e}])")]
    NoConvergence { iterations: usize, lo: f64, hi: f64 },

    #[error("iterate lost positivity (min value {min:.3e}); the grid is too coarse")]
    LostPositivity { min: f64 },

    #[error("iterate exceeded the supersolution bound: {value:.6e} > {bound:.6e}")]
    BoundViolated { value: f64, bound: f64 },

    #[error("fixed-point branch diverged at beta = {beta}")]
    BranchDiverged { beta: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("exponents for this cone and operator are not available")]
    MissingExponents,

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
