use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("feature index {index} out of range for {p} features")]
    FeatureOutOfRange { index: usize, p: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("degenerate variance for transform {transform}: the self-normalizing scale is zero")]
    DegenerateVariance { transform: String },
    #[error("inference sample too small: need at least {needed} rows, got {got}")]
    InferenceTooSmall { needed: usize, got: usize },
    #[error("partition block {block} has {size} rows; every block needs at least 2")]
    PartitionTooSmall { block: usize, size: usize },
    #[error("out-of-bag estimate missing for {dropped} of {total} rows")]
    EmptyOob { dropped: usize, total: usize },
    #[error("conditional permutation strata too small: {0}")]
    StrataTooSmall(String),
    #[error("invalid significance level {0}; must lie strictly between 0 and 1")]
    InvalidAlpha(f64),
    #[error("repetition count must be positive")]
    InvalidReps,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures caused by the numbers rather than by the inputs'
    /// shape or configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateVariance { .. } | Error::EmptyOob { .. } | Error::StrataTooSmall(_)
        )
    }
}
