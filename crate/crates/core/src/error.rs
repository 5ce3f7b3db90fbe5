use thiserror::Error;

/// Errors raised by model construction, fitting and testing.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("singular matrix (condition number {condition:.3e})")]
    Singular { condition: f64 },

    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    #[error("inconsistent cell probabilities: {0}")]
    InconsistentCells(String),

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),
}

impl Error {
    /// True for errors caused by bad input rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::DimensionMismatch { .. }
                | Error::Domain(_)
                | Error::InvalidData(_)
                | Error::DegenerateDesign(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
