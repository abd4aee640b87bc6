use thiserror::Error;

use crate::structure::BlockSplit;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("entries sum to {sum}, off by {deviation:e}")]
    SumNotOne { sum: f64, deviation: f64 },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("grid is empty or ragged")]
    Ragged,
    #[error("axis {axis} out of range for a {rank}-axis joint")]
    BadAxis { axis: usize, rank: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("coupling row for cell ({row}, {col}) sums to {sum}")]
    InvalidCoupling { row: usize, col: usize, sum: f64 },
    #[error("matrix has empty support")]
    EmptySupport,
    #[error("matrix is a block matrix: rows {:?} / {:?}, cols {:?} / {:?}", .0.rows1, .0.rows2, .0.cols1, .0.cols2)]
    IsBlock(BlockSplit),
    #[error("matrix is not a block matrix")]
    NotBlock,
    #[error("support is not a rectangle")]
    NotRMatrix,
    #[error("no epsilon in the halving schedule gives positive coefficients")]
    DegeneratePositivity,
    #[error("input too large: {0}")]
    TooLarge(String),
    #[error("pair is not independent: mutual information {mi:e} bits")]
    NotIndependent { mi: f64 },
    #[error("map undefined or out of range at index {0}")]
    BadMap(usize),
    #[error("cannot pad order {from} down to {to}")]
    OrderDecrease { from: usize, to: usize },
    #[error("power must be at least 1")]
    BadN,
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("entry at ({row}, {col}) is not a multiple of 2^-{level}")]
    NotDyadic { row: usize, col: usize, level: u32 },
    #[error("matrix is singular or not square")]
    SingularM,
    #[error("correction target sums to {0:e}, expected 0")]
    NonzeroSum(f64),
    #[error("matrix has a zero entry at ({row}, {col})")]
    ZeroEntry { row: usize, col: usize },
    #[error("no convergence after {iters} iterations, residual {residual:e}")]
    NoConvergence { iters: usize, residual: f64 },
    #[error("construction needs order {needed}, cap is {cap}")]
    OrderCapExceeded { needed: usize, cap: usize },
    #[error("block row or column {0} does not sum to a rank-1 matrix")]
    RowColNotRank1(String),
    #[error("grid mass does not match witness base: deviation {0:e}")]
    MassMismatch(f64),
    #[error("negative rate or entropy")]
    NegativeRate,
    #[error("epsilon must lie in [0, 1/2), got {0}")]
    EpsOutOfRange(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error: {0}")]
    Parse(String),
}
