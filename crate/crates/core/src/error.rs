use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report.
///
/// Variants fall into two families: data problems (bad files, missing
/// columns, unparsable cells) and numeric/domain problems (singular
/// systems, invalid parameters, impossible designs). [`Error::is_data_error`]
/// tells them apart.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite (pivot {pivot} failed)")]
    NotPositiveDefinite { pivot: usize },

    #[error("eigenvalue iteration did not converge within {sweeps} sweeps")]
    ConvergenceFailure { sweeps: usize },

    #[error("column {column} has zero standard deviation")]
    ConstantColumn { column: usize },

    #[error("need at least {required} rows, got {actual}")]
    TooFewRows { required: usize, actual: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("design matrix is rank deficient at column {column}")]
    RankDeficient { column: usize },

    #[error("confidence level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),

    #[error("probability must lie in [0, 1], got {0}")]
    InvalidProbability(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("validation size {n_validate} is not within 1..={n_total}")]
    SizeExceedsPopulation { n_validate: usize, n_total: usize },

    #[error("non-finite ordering value at row {row}")]
    NonFiniteValue { row: usize },

    #[error("design is missing a required artifact: {0}")]
    MissingDesignArtifact(&'static str),

    #[error("predictor recipe omits design variable {0}")]
    MissingDesignVariable(String),

    #[error("predictor {predictor} unavailable at row {row}")]
    MissingPredictor { predictor: String, row: usize },

    #[error("only {validated} validated rows, need at least {required}")]
    TooFewValidated { validated: usize, required: usize },

    #[error("need at least 2 imputations, got {0}")]
    TooFewImputations(usize),

    #[error("invalid error-injection rule: {0}")]
    InvalidRule(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no replicates for cell {0}")]
    EmptyCell(String),

    #[error("{failed} of {total} replicate analyses failed (limit 1%)")]
    TooManyFailures { failed: usize, total: usize },

    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("non-numeric or missing value {value:?} at row {row}, column `{column}`")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for problems with input files rather than with the numbers in them.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::FileNotFound(_)
                | Error::MissingColumn(_)
                | Error::NonNumericCell { .. }
                | Error::MissingDesignArtifact(_)
                | Error::Csv(_)
                | Error::Io(_)
        )
    }
}
