use thiserror::Error;

pub type Result<T> = std::result::Result<T, AmpError>;

#[derive(Debug, Error)]
pub enum AmpError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index {index} out of range for dimension {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("horizon mismatch: requested {requested}, available {available}")]
    HorizonMismatch { requested: usize, available: usize },

    #[error("state-evolution Onsager mode needs a state-evolution path")]
    MissingStatePath,

    #[error("leave-out index set is empty")]
    EmptyLeaveOutSet,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid variance profile: {0}")]
    InvalidProfile(String),

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPsd { eigenvalue: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),

    #[error("{} replicate(s) failed, first seed {}: {}", .0.len(), .0[0].0, .0[0].1)]
    Replicates(Vec<(u64, String)>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
