use core::ops::Deref;

use super::Matrix;
use crate::{Error, Result};

/// Default bound on `‖WᵀW − I‖_F / √n`.
pub const DEFAULT_ORTHO_TOL: f64 = 1e-8;

/// A square matrix certified to satisfy `‖WᵀW − I‖_F ≤ ortho_tol · √n`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthogonalMatrix {
    inner: Matrix,
    ortho_tol: f64,
}

impl OrthogonalMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        Self::with_tol(m, DEFAULT_ORTHO_TOL)
    }

    /// Certifies `m` against a caller-chosen tolerance, e.g. for matrices
    /// printed to four decimals.
    pub fn with_tol(m: Matrix, ortho_tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSquare(m.rows(), m.cols()));
        }
        let deviation = orthogonality_deviation(&m);
        let bound = ortho_tol * (m.rows() as f64).sqrt();
        if deviation > bound {
            return Err(Error::NotOrthogonal { deviation, bound });
        }
        Ok(Self { inner: m, ortho_tol })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: Matrix::identity(n),
            ortho_tol: DEFAULT_ORTHO_TOL,
        }
    }

    /// Planar rotation `[[cos φ, −sin φ], [sin φ, cos φ]]`.
    pub fn rotation2(phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        let m = Matrix::from_rows(&[[c, -s], [s, c]]).expect("finite angle");
        Self::new(m).expect("rotation is orthogonal")
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.inner.rows()
    }

    pub fn ortho_tol(&self) -> f64 {
        self.ortho_tol
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.inner
    }

    pub fn into_matrix(self) -> Matrix {
        self.inner
    }

    pub fn transpose(&self) -> Self {
        Self {
            inner: self.inner.transpose(),
            ortho_tol: self.ortho_tol,
        }
    }

    /// Product of two orthogonal matrices, re-certified at the looser of the
    /// two tolerances.
    pub fn compose(&self, other: &OrthogonalMatrix) -> Result<Self> {
        Self::with_tol(self.inner.matmul(&other.inner)?, self.ortho_tol.max(other.ortho_tol))
    }

    /// `‖WᵀW − I‖_F`.
    pub fn deviation(&self) -> f64 {
        orthogonality_deviation(&self.inner)
    }
}

impl Deref for OrthogonalMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.inner
    }
}

impl AsRef<Matrix> for OrthogonalMatrix {
    fn as_ref(&self) -> &Matrix {
        &self.inner
    }
}

/// `‖MᵀM − I‖_F` for a square `m`.
pub fn orthogonality_deviation(m: &Matrix) -> f64 {
    let g = m.gram();
    let n = g.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = g[(i, j)] - if i == j { 1.0 } else { 0.0 };
            s += d * d;
        }
    }
    s.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_rotation_rejects_scaled() {
        let r = OrthogonalMatrix::rotation2(0.3);
        assert!(r.deviation() < 1e-15);
        let err = OrthogonalMatrix::new(r.scale(1.01)).unwrap_err();
        assert!(matches!(err, Error::NotOrthogonal { .. }));
        assert!(matches!(
            OrthogonalMatrix::new(Matrix::zeros(2, 3)),
            Err(Error::NotSquare(2, 3))
        ));
    }

    #[test]
    fn loose_tolerance_for_printed_matrices() {
        let a0 = Matrix::from_rows(&[
            [-0.8249, 0.3820, -0.4168],
            [-0.5240, -0.2398, 0.8173],
            [-0.2122, -0.8925, -0.3979],
        ])
        .unwrap();
        assert!(OrthogonalMatrix::new(a0.clone()).is_err());
        assert!(OrthogonalMatrix::with_tol(a0, 1e-3).is_ok());
    }
}
