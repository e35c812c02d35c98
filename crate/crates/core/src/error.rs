use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid symbol: {0}")]
    InvalidSymbol(String),

    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("window half-length {half_length} too small, need at least {required}")]
    WindowTooSmall { half_length: usize, required: usize },

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: String, iterations: usize },

    #[error("critical point refinement needed near p = {p:.6}: {detail}")]
    RefinementRequired { p: f64, detail: String },

    #[error("{count} eigenvalues in interval exceed the limit {limit}")]
    TooManyEigenvalues { count: usize, limit: usize },

    #[error("interval touches the critical set at {value:.12}")]
    TouchesCriticalSet { value: f64 },

    #[error("branch {branch} is stationary at p = {p:.6} inside the window")]
    StationaryInWindow { branch: usize, p: f64 },

    #[error("filter of degree {requested} misses tolerance {eps:e} (tail {tail:e}, required degree {required:?})")]
    FilterDegree {
        requested: usize,
        required: Option<usize>,
        eps: f64,
        tail: f64,
    },

    #[error("filtered subspace is empty")]
    EmptySubspace,

    #[error("shift {shift} is numerically an eigenvalue (condition estimate {condition:e})")]
    NearEigenvalue { shift: f64, condition: f64 },

    #[error("polynomial recurrence left the spectral hull at step {step}")]
    HullViolation { step: usize },

    #[error("propagated wave reached the window boundary (outer mass {mass:e})")]
    FrontHitsBoundary { mass: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
