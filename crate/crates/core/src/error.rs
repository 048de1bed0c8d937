use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum AnovaError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("cell ({row},{col}) has {count} observation(s); at least 2 are required")]
    EmptyCell {
        row: usize,
        col: usize,
        count: usize,
    },

    #[error("cell ({row},{col}) has zero sample variance")]
    DegenerateCell { row: usize, col: usize },

    #[error("solver did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("singular linear system in the row-effect update")]
    SingularSystem,

    #[error("bootstrap replicate {replicate} failed to converge after {redraws} redraws")]
    ExcessiveNonConvergence { replicate: usize, redraws: usize },

    #[error("covariance matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("invalid degrees of freedom: {0}")]
    InvalidDf(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid error-family parameters: {0}")]
    InvalidFamilyParams(String),

    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl AnovaError {
    /// True for failures caused by bad input rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            AnovaError::NonConvergence { .. }
                | AnovaError::SingularSystem
                | AnovaError::ExcessiveNonConvergence { .. }
                | AnovaError::NotPsd { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, AnovaError>;
