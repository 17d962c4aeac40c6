use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("invalid chain spec: n = {0}, need n >= 2")]
    ChainTooShort(usize),

    #[error("{what} index {index} out of range (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("eta = {eta} > 0 requires a strictly positive policy, but pi({action}|{state}) = 0")]
    ZeroProbability {
        eta: f64,
        state: usize,
        action: usize,
    },

    #[error("chain is not ergodic: {0}")]
    NonErgodic(String),

    #[error("linear solve residual {residual:e} exceeds {tolerance:e}")]
    SolverResidual { residual: f64, tolerance: f64 },

    #[error("contraction premise violated: {0}")]
    CertificateViolation(String),

    #[error("no fixed-point oracle available for this operator family")]
    OracleUnavailable,

    #[error("run diverged at step {t}: {reason}")]
    Diverged { t: u64, reason: String },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("metrics error: {0}")]
    Metrics(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(line: usize, message: impl Into<String>) -> Self {
        Error::Config {
            line,
            message: message.into(),
        }
    }
}
