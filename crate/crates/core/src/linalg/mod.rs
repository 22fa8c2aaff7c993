//! Dense linear algebra: matrices, Hadamard powers, SVD and projections onto
//! the orthogonal group.

mod matrix;
mod orthogonal;
mod permutation;
mod polar;
mod qr;
mod svd;

pub use matrix::{dot, powu, Matrix};
pub use orthogonal::{orthogonality_deviation, OrthogonalMatrix, DEFAULT_ORTHO_TOL};
pub use permutation::{nearest_signed_permutation, SignedPermutation};
pub use polar::{project_orthogonal, RANK_TOL};
pub use qr::qr;
pub use svd::{svd, svd_wide, SvdResult};
