use thiserror::Error;

use crate::bitcore::BitString;

/// Everything that can go wrong while allocating, coding or loading.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KcError {
    #[error("budget exceeded at request {index}")]
    BudgetExceeded { index: usize },

    #[error("invalid length {length}: must be at least {min} and at most {max}")]
    InvalidLength { length: u64, min: u64, max: u64 },

    #[error("solver is poisoned by an earlier budget failure")]
    SolverPoisoned,

    #[error("invalid request {index}: {reason}")]
    InvalidRequest { index: usize, reason: String },

    #[error("no base with a clear extension at stage {stage}; total weight must have exceeded 1")]
    HypothesisFailure { stage: usize },

    #[error("combined weight of sequence and avoid set exceeds 1")]
    CombinedBudgetExceeded,

    #[error("avoid set is not prefix-free: {0} is a prefix of {1}")]
    NotPrefixFree(BitString, BitString),

    #[error("measure undefined on {0}")]
    UndefinedMeasure(BitString),

    #[error("enumeration order violation: {0} listed before its prefix {1}")]
    EnumerationOrder(BitString, BitString),

    #[error("target {target} lies beyond the working bound {bound}")]
    TargetBeyondBound { target: usize, bound: usize },

    #[error("no Q-avoiding code found for {0}")]
    NoAvoidingCode(BitString),

    #[error("not a code: no prefix of the input decodes to the requested length")]
    NotACode,

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid approximation run: {0}")]
    InvalidRun(String),

    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("header mismatch for {field}: expected {expected}, found {found}")]
    HeaderMismatch {
        field: String,
        expected: String,
        found: String,
    },
}

pub type Result<T> = std::result::Result<T, KcError>;
