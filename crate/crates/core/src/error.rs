use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {op} got {lhs:?} and {rhs:?}")]
    DimensionMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("matrix must have at least one row and one column, got {0}x{1}")]
    EmptyMatrix(usize, usize),
    #[error("data length {len} does not match {rows}x{cols}")]
    BadLength { rows: usize, cols: usize, len: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),
    #[error("matrix is not orthogonal: |W^T W - I|_F = {deviation:e} exceeds {bound:e}")]
    NotOrthogonal { deviation: f64, bound: f64 },
    #[error("rank deficient: smallest singular value {sigma_min:e} vs largest {sigma_max:e}")]
    RankDeficient { sigma_min: f64, sigma_max: f64 },
    #[error("Jacobi SVD did not converge within {sweeps} sweeps")]
    NonConvergence { sweeps: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
