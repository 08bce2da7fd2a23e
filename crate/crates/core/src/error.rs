use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    DimensionMismatch { op: &'static str, detail: String },

    #[error("row {row} is not a probability vector (sum {sum:.6}, min {min:.3e})")]
    NotStochastic { row: usize, sum: f64, min: f64 },

    #[error("invalid clip spec: {0}")]
    InvalidSpec(String),

    #[error("infeasible schedule: {0}")]
    InfeasibleSchedule(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn dims(op: &'static str, detail: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            op,
            detail: detail.into(),
        }
    }
}
