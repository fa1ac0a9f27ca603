//! Crate-wide error type.

/// Errors raised across the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    NonFiniteLoss { epoch: usize, loss: f64 },

    #[error("statistic component {dim} = {value} outside grid range [{min}, {max}]")]
    OutOfRange {
        dim: usize,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("no sample landed in any bin")]
    AllBinsEmpty,

    #[error("quadrature weights are not a normalized positive rule: {reason}")]
    BadQuadrature { reason: String },

    #[error("inconsistent stresses within a homogenization group at step {step}")]
    InconsistentGroup { step: usize },

    #[error("degenerate regression: {reason}")]
    DegenerateRegression { reason: String },

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("conditional averaging increased the error with an exact statistic: {before} -> {after}")]
    NeverWorseViolated { before: f64, after: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
