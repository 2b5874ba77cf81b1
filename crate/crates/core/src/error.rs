use thiserror::Error;

/// Errors raised while validating inputs or running the solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CvqpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("bad bounds at row {index}: l = {lower} > u = {upper}")]
    BadBounds { index: usize, lower: f64, upper: f64 },

    #[error("beta must lie strictly inside (0, 1), got {0}")]
    BadBeta(f64),

    #[error("P is not symmetric: |P[{row}][{col}] - P[{col}][{row}]| = {gap:e}")]
    AsymmetricP { row: usize, col: usize, gap: f64 },

    #[error("k = {k} is outside 1..={m}")]
    KOutOfRange { k: usize, m: usize },

    #[error("input contains a non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid solver settings: {0}")]
    InvalidSettings(String),

    #[error(
        "M = P + rho (A'A + B'B) is not positive definite; P, A and B must have no common nullspace"
    )]
    NotPositiveDefinite,

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, CvqpError>;
