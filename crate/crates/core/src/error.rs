use thiserror::Error;

/// Errors produced by the constructions and checks in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),
    #[error("inverse temperature must be nonnegative, got {0}")]
    InvalidBeta(f64),
    #[error("target energy {target} outside [{low}, {high}] (bracket [{bracket_low}, {bracket_high}])")]
    OutOfRange {
        target: f64,
        low: f64,
        high: f64,
        bracket_low: f64,
        bracket_high: f64,
    },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("sum mismatch: {0} vs {1}")]
    SumMismatch(f64, f64),
    #[error("target is not majorised by the source")]
    NotMajorised,
    #[error("matrix is not doubly stochastic: {0}")]
    NotDoublyStochastic(String),
    #[error("matrix is not orthogonal (max deviation {0:e})")]
    NotOrthogonal(f64),
    #[error("permutations do not form a Latin square: {0}")]
    NotLatinSquare(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("coordinates have no valid probability preimage: {0}")]
    InvalidPreimage(String),
    #[error("vertex enumeration of {count} points exceeds the limit {limit}")]
    TooLarge { count: usize, limit: usize },
    #[error("reduced coordinate x_{0} vanishes at the initial temperature")]
    DegenerateCoordinate(usize),
    #[error("dimension {0} is not supported by this method")]
    UnsupportedDimension(usize),
    #[error("conditions not met: {0}")]
    ConditionsNotMet(String),
    #[error("sign check failed: {0}")]
    SignCheckFailure(String),
    #[error("companion matrix residual {0:e} exceeds tolerance")]
    CompanionFailure(f64),
    #[error("energy budget must be nonnegative, got {0}")]
    InvalidBudget(f64),
    #[error("state dimension {dim} exceeds the exact simulation budget {limit}")]
    DimensionBudgetExceeded { dim: usize, limit: usize },
    #[error("round {round}: {reason}")]
    StepUnbuildable { round: usize, reason: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
