use thiserror::Error;

/// Errors surfaced by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("arity mismatch: expected {expected} values, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("reverse pass requested before forward evaluation")]
    NotEvaluated,

    #[error("probe set for n={n}, d={d} does not fit a program of width {width}")]
    InvalidProbes { n: usize, d: usize, width: usize },

    #[error("k={k} out of range for a graph with {n} nodes")]
    KOutOfRange { k: usize, n: usize },

    #[error("invalid head partition: {0}")]
    InvalidPartition(String),

    #[error("singular configuration: particles {0} and {1} coincide")]
    Singular(usize, usize),

    #[error("no Metropolis move accepted in the {window} sweeps ending at sweep {sweep}; reduce the step size")]
    NoAcceptance { sweep: usize, window: usize },

    #[error("integration aborted at step {step}: {reason}")]
    Integration { step: usize, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("configuration error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("malformed data: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
