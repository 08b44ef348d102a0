use thiserror::Error;

/// Errors raised by the toolkit. Every variant renders as a single line so the
/// CLI can forward it to stderr unchanged.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: value {value} with error estimate {abs_error_estimate} after {evaluations} evaluations")]
    Quadrature {
        value: f64,
        abs_error_estimate: f64,
        evaluations: usize,
    },

    #[error("sampling error: {message} (attempts {attempts}, acceptance rate {acceptance_rate})")]
    Sampling {
        message: String,
        attempts: usize,
        acceptance_rate: f64,
    },

    /// The step budget ran out before the path left its domain. The partial
    /// path is kept so callers can inspect or resume it.
    #[error("step budget of {max_steps} exhausted at time {time}")]
    Budget {
        max_steps: usize,
        time: f64,
        partial: Option<Box<crate::bm::Path2D>>,
    },

    #[error("input error: {0}")]
    Input(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Input(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
