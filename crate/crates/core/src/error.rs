use thiserror::Error;

/// Errors raised by the rate kernels, optimizers and evaluators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate noise covariance (min eigenvalue {min_eigenvalue:e})")]
    DegenerateNoise { min_eigenvalue: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("frame of {l_frame} slots cannot carry a rank-{rank} covariance")]
    InfeasibleFrame { rank: usize, l_frame: usize },

    #[error(
        "{op} did not converge after {iterations} iterations (residual {residual:e}, last powers {last_powers:?})"
    )]
    NotConverged {
        op: &'static str,
        iterations: usize,
        residual: f64,
        last_powers: Vec<f64>,
    },

    #[error("unreliable high-SNR regime: {0}")]
    UnreliableRegime(String),

    #[error("{0} requires a non-empty input")]
    Empty(&'static str),

    #[error("operation requires scenario kind {expected}, got {got}")]
    WrongScenario { expected: &'static str, got: String },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
