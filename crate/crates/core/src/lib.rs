//! Complete orthogonal dictionary learning by maximizing the element-wise
//! ℓ⁴-norm over the orthogonal group.
//!
//! The crate is `no_std` (it needs `alloc`) and holds the numerical kernel:
//!
//! - [`linalg`]: dense matrices, Hadamard powers, one-sided Jacobi SVD and the
//!   polar projection onto O(n).
//! - [`model`]: Bernoulli-Gaussian data generation, Haar-random orthogonal
//!   matrices and the whitening (preconditioning) step.
//! - [`solver`]: the matching-stretching-projection (MSP) fixed-point
//!   iterations, projected gradient ascent with arbitrary step size and the
//!   ℓ^{2k} / bias-corrected variants.
//! - [`analysis`]: closed-form expectations and theory checks used as oracles.
//!
//! File formats, the experiment harness and the CLI live in the `l4dict`
//! crate.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod analysis;
mod error;
pub mod linalg;
pub mod model;
pub mod solver;

pub use error::{Error, Result};
pub use linalg::{Matrix, OrthogonalMatrix, SignedPermutation, SvdResult};
pub use model::{DatasetBundle, ModelParams};
pub use solver::{SolveConfig, SolveTrace, StepSize};
