use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} exceeds the desk-scale limit {limit}")]
    ResourceBound { what: &'static str, value: usize, limit: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("graph is disconnected: {count} components (first points: {representatives:?}, sizes: {sizes:?})")]
    Disconnected { count: usize, representatives: Vec<usize>, sizes: Vec<usize> },

    #[error("symmetric eigensolver did not converge for n = {0}")]
    EigenNoConvergence(usize),

    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),

    #[error("empty or degenerate window: {0}")]
    DegenerateWindow(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("space metadata is missing {0}")]
    MissingDimension(&'static str),

    #[error("kernel normalization did not converge after {sweeps} sweeps (residual {residual:e})")]
    NormalizationFailed { sweeps: usize, residual: f64 },

    #[error("invalid point set: {0}")]
    InvalidPointSet(String),

    #[error("parameter constraint violated: {0}")]
    Constraint(String),

    #[error("space hash mismatch: model built for {expected}, got {actual}")]
    HashMismatch { expected: String, actual: String },

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
