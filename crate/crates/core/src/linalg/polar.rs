use super::svd::{polar_right_only, svd};
use super::{Matrix, OrthogonalMatrix};
use crate::{Error, Result};

/// Relative singular-value floor below which the polar factor is not unique.
pub const RANK_TOL: f64 = 1e-12;

/// Above this condition number the polar factor is formed as `U·Vᵀ` from the
/// full SVD instead of `M·VΣ⁻¹Vᵀ`.
const FAST_PATH_MAX_COND: f64 = 1e6;

/// Frobenius-nearest orthogonal matrix `U·Vᵀ` (the orthogonal polar factor).
///
/// Fails with [`Error::RankDeficient`] when `σ_n ≤ 1e-12·σ₁`.
pub fn project_orthogonal(m: &Matrix) -> Result<OrthogonalMatrix> {
    if !m.is_square() {
        return Err(Error::NotSquare(m.rows(), m.cols()));
    }
    let (fast, smin, smax) = polar_right_only(m, FAST_PATH_MAX_COND)?;
    if let Some(p) = fast {
        return OrthogonalMatrix::new(p);
    }
    if !(smin > RANK_TOL * smax) {
        return Err(Error::RankDeficient {
            sigma_min: smin,
            sigma_max: smax,
        });
    }
    let s = svd(m)?;
    let smax = s.sigma[0];
    let smin = *s.sigma.last().expect("non-empty");
    if !(smin > RANK_TOL * smax) {
        return Err(Error::RankDeficient {
            sigma_min: smin,
            sigma_max: smax,
        });
    }
    let p = s.u.matmul_transpose(&s.v)?;
    OrthogonalMatrix::new(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_positive_diagonal() {
        let p = project_orthogonal(&Matrix::identity(3)).unwrap();
        assert!(p.max_abs_diff(&Matrix::identity(3)) < 1e-15);
        let p = project_orthogonal(&Matrix::diag(&[2.0, 0.5, 3.0])).unwrap();
        assert!(p.max_abs_diff(&Matrix::identity(3)) < 1e-15);
    }

    #[test]
    fn negative_diagonal_keeps_sign() {
        let p = project_orthogonal(&Matrix::diag(&[-2.0, 0.5])).unwrap();
        assert!(p.max_abs_diff(&Matrix::diag(&[-1.0, 1.0])) < 1e-15);
    }

    #[test]
    fn rank_deficient_errors() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert!(matches!(project_orthogonal(&m), Err(Error::RankDeficient { .. })));
        assert!(matches!(
            project_orthogonal(&Matrix::zeros(3, 3)),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn example_one_first_projection() {
        let a0 = Matrix::from_rows(&[
            [-0.8249, 0.3820, -0.4168],
            [-0.5240, -0.2398, 0.8173],
            [-0.2122, -0.8925, -0.3979],
        ])
        .unwrap();
        let a1 = Matrix::from_rows(&[
            [-0.9795, 0.0621, -0.1917],
            [-0.1953, -0.0594, 0.9789],
            [-0.0494, -0.9963, -0.0703],
        ])
        .unwrap();
        let p = project_orthogonal(&a0.hadamard_power(3)).unwrap();
        assert!(p.max_abs_diff(&a1) <= 5e-5, "{p:?}");
    }
}
