//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range for vector length {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("entry ({i}, {j}, {k}) has a repeated index; only strict third-order terms are stored")]
    DiagonalEntry { i: usize, j: usize, k: usize },

    #[error("negative weight {w} at entry ({i}, {j}, {k})")]
    NegativeWeight { i: usize, j: usize, k: usize, w: f64 },

    #[error("dimension mismatch: expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("bad shape: n1 = {n1} must satisfy 1 <= n1 <= n2 = {n2}")]
    BadShape { n1: usize, n2: usize },

    #[error("non-finite entry at row {row}, column {col}")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("vector is not a valid assignment (binary, one per row, at most one per column)")]
    NotAnAssignment,

    #[error("homogeneous tuple: the adaptive increment is undefined when all arguments coincide")]
    HomogeneousTuple,

    #[error("instance too large for exhaustive reference: {what} = {size} exceeds limit {limit}")]
    TooLarge { what: &'static str, size: u128, limit: u128 },

    #[error("matrix is not symmetric within tolerance")]
    NotSymmetric,

    #[error("degenerate triangle: area below threshold")]
    DegenerateTriangle,

    #[error("too few points: need at least {need}, got {got}")]
    TooFewPoints { need: usize, got: usize },

    #[error("all candidate triangles are degenerate")]
    AllTriplesDegenerate,

    #[error("sigma must be positive and finite, got {0}")]
    BadSigma(f64),

    #[error("paired score lists have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid solver configuration: {0}")]
    ConfigInvalid(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
