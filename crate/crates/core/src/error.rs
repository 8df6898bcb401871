use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Numerical failures that a limit estimate can express (divergence, oscillation,
/// non-finite probes) are reported as `Undetermined` verdicts instead; the variants
/// here cover the cases where no meaningful value exists at all.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{label}: evaluation at t = {t:e} is outside the domain ({reason})")]
    Domain {
        label: String,
        t: f64,
        reason: String,
    },

    #[error("tail integral divergent or too heavy (from t = {t:e})")]
    TailDivergent { t: f64 },

    #[error("cumulative hazard saturates: H stays below {target:e} up to t = {cap:e}")]
    HazardSaturates { target: f64, cap: f64 },

    #[error("{label}: not ultimately monotone on probe range ({violations} of {pairs} probe pairs violate)")]
    NotMonotone {
        label: String,
        violations: usize,
        pairs: usize,
    },

    #[error("{label}: level {level:e} unreachable before bracket cap {cap:e}")]
    BracketCap { label: String, level: f64, cap: f64 },

    #[error("quadrature on [{a:e}, {b:e}] failed to reach tolerance (estimate {estimate:e}, error {error:e})")]
    Quadrature {
        a: f64,
        b: f64,
        estimate: f64,
        error: f64,
    },

    #[error("{label}: finite-difference derivative unstable at t = {t:e}")]
    UnstableDerivative { label: String, t: f64 },

    #[error("{0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{0} is required but the distribution does not provide it")]
    Missing(&'static str),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("limit of {what} did not converge: {detail}")]
    NoLimit { what: String, detail: String },

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
