//! Analytic Hierarchy Process kernel.
//!
//! A [`ComparisonMatrix`] holds one stakeholder's judgments as exact
//! rationals so that reciprocity (`a_ij * a_ji == 1`) is never subject to
//! rounding. Priorities and consistency figures are computed in floating
//! point on a [`PositiveMatrix`] view.

mod attribute;
mod consistency;
mod eigen;
mod judgment;
mod matrix;
mod random_index;

use thiserror::Error;

pub use attribute::{Direction, QualityAttribute};
pub use consistency::{
    consistency, consistency_dense, repair_triple, ConsistencyOptions, ConsistencyReport,
    OffendingTriple, DEFAULT_CR_LIMIT, DEFAULT_TRIPLE_THRESHOLD,
};
pub use eigen::{
    power_iteration, principal_eigen, Eigenpair, PositiveMatrix, CONVERGENCE_TOLERANCE,
    MAX_ITERATIONS,
};
pub use judgment::{Judgment, JudgmentLevel, Rational, JUDGMENT_SCALE};
pub use matrix::{ComparisonMatrix, MatrixDocument, MAX_ORDER};
pub use random_index::{
    cached_random_index, random_index, random_index_cached_or_sampled, CACHED_RI_SAMPLES,
    CACHED_RI_SEED, CACHED_RI_TABLE,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AhpError {
    #[error("matrix needs at least 2 attributes, got {0}")]
    TooFewAttributes(usize),
    #[error("matrix order {0} exceeds the supported maximum of {MAX_ORDER}")]
    OrderTooLarge(usize),
    #[error("duplicate attribute id `{0}`")]
    DuplicateAttribute(String),
    #[error("index ({i}, {j}) out of bounds for order {n}")]
    IndexOutOfBounds { i: usize, j: usize, n: usize },
    #[error("diagonal entry ({0}, {0}) is fixed at 1")]
    DiagonalImmutable(usize),
    #[error("entry ({i}, {j}) = {value} is not a judgment-scale value")]
    IllegalJudgment { i: usize, j: usize, value: String },
    #[error("entries ({i}, {j}) and ({j}, {i}) are not reciprocal")]
    NotReciprocal { i: usize, j: usize },
    #[error("expected {expected} entries, got {actual}")]
    WrongEntryCount { expected: usize, actual: usize },
    #[error("matrix must be square and non-empty")]
    NotSquare,
    #[error("entry ({i}, {j}) must be positive and finite")]
    NonPositiveEntry { i: usize, j: usize },
    #[error("power iteration did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("invalid threshold: {0}")]
    InvalidThreshold(String),
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("malformed matrix document: {0}")]
    Document(String),
}
