//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by compositional covariance operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A zero or negative value reached an operation that needs strictly
    /// positive input (closure, log transforms). Zeros must be imputed first.
    #[error(
        "non-positive entry {value} at row {row}, column {col}; impute zeros before log transforms"
    )]
    NonPositiveEntry { row: usize, col: usize, value: f64 },

    /// Compositions need at least three parts.
    #[error("need at least {required} parts, got {got}")]
    DimensionTooSmall { required: usize, got: usize },

    /// Reference part index outside `1..=D`.
    #[error("reference index {got} outside 1..={max}")]
    BadReferenceIndex { got: usize, max: usize },

    /// A logratio magnitude exceeds the exponentiation guard.
    #[error("logratio {value} at row {row} exceeds the exponentiation guard (|x| <= 700)")]
    OverflowRisk { row: usize, value: f64 },

    /// Not enough samples for the requested estimator.
    #[error("need at least {required} samples, got {got}")]
    TooFewSamples { required: usize, got: usize },

    /// Matrix or vector dimensions disagree.
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    /// Shrinkage intensity outside `[0, 1]`.
    #[error("shrinkage intensity {0} outside [0, 1]")]
    LambdaOutOfRange(f64),

    /// Covariance representation does not match the requested operation.
    #[error("representation mismatch: expected {expected}, got {got}")]
    RepresentationMismatch { expected: String, got: String },

    /// ALR covariance too ill-conditioned to invert directly.
    #[error("covariance numerically singular (condition {condition:.3e}); shrink before inverting")]
    SingularCovariance { condition: f64 },

    /// An unimputed zero reached a log transform.
    #[error("zero entry at row {row}, column {col} reached a log; impute zeros first")]
    ZeroEntry { row: usize, col: usize },

    /// Alpha variance vectors must be strictly positive.
    #[error("alpha entry {index} is {value}; all entries must be > 0")]
    NonPositiveAlpha { index: usize, value: f64 },

    /// A dilution removal order eliminates part of the tracked pair.
    #[error("removal order eliminates part {part} of the tracked pair")]
    PairRemoved { part: usize },

    /// A count row sums to zero.
    #[error("row {row} has zero total count")]
    EmptyRow { row: usize },

    /// CZM delta fraction outside `(0, 1)`.
    #[error("delta fraction {0} outside (0, 1)")]
    DeltaOutOfRange(f64),

    /// CZM replacement mass for a row would reach or exceed the unit total.
    #[error("row {row}: {zeros} zeros at delta {delta} leave no mass for the observed parts")]
    DeltaExceedsRowMass {
        row: usize,
        zeros: usize,
        delta: f64,
    },

    /// Frequency shrinkage needs a row total of at least two.
    #[error("row {row} total {total} too small for frequency shrinkage (needs >= 2)")]
    RowTotalTooSmall { row: usize, total: u64 },

    /// Cholesky factorization failed.
    #[error("covariance is not positive definite")]
    NotPositiveDefinite,

    /// Subsampling pool does not contain enough zero-free rows.
    #[error("only {available} zero-free rows available, need {needed}")]
    InsufficientZeroFreeRows { available: usize, needed: usize },

    /// A row does not sum to one within tolerance.
    #[error("row {row} sums to {sum}, outside the unit-sum tolerance")]
    UnitSumViolation { row: usize, sum: f64 },

    /// A matrix expected to be symmetric is not.
    #[error("matrix asymmetric by {max_abs:.3e}")]
    NotSymmetric { max_abs: f64 },

    /// A non-finite value where finite reals are required.
    #[error("non-finite entry at row {row}, column {col}")]
    NonFiniteEntry { row: usize, col: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Malformed input file.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Invalid benchmark scenario.
    #[error("invalid scenario: {0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;
