use alloc::vec;

use super::Matrix;
use crate::{Error, Result};

/// Householder QR of a square matrix: `m = Q · R` with `Q` orthogonal and
/// `R` upper triangular.
pub fn qr(m: &Matrix) -> Result<(Matrix, Matrix)> {
    if !m.is_square() {
        return Err(Error::NotSquare(m.rows(), m.cols()));
    }
    let n = m.rows();
    let mut r = m.clone();
    let mut q = Matrix::identity(n);
    let mut v = vec![0.0; n];
    for k in 0..n.saturating_sub(1) {
        let norm = (k..n).map(|i| r[(i, k)] * r[(i, k)]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if r[(k, k)] > 0.0 { -norm } else { norm };
        for i in 0..n {
            v[i] = if i < k { 0.0 } else { r[(i, k)] };
        }
        v[k] -= alpha;
        let vnorm2: f64 = v[k..].iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // R ← (I − 2vvᵀ/vᵀv) R
        for j in 0..n {
            let s: f64 = (k..n).map(|i| v[i] * r[(i, j)]).sum::<f64>() * 2.0 / vnorm2;
            for i in k..n {
                r[(i, j)] -= s * v[i];
            }
        }
        // Q ← Q (I − 2vvᵀ/vᵀv)
        for i in 0..n {
            let s: f64 = (k..n).map(|l| q[(i, l)] * v[l]).sum::<f64>() * 2.0 / vnorm2;
            for l in k..n {
                q[(i, l)] -= s * v[l];
            }
        }
    }
    for i in 1..n {
        for j in 0..i {
            r[(i, j)] = 0.0;
        }
    }
    Ok((q, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthogonal::orthogonality_deviation;

    #[test]
    fn factors_reconstruct() {
        let m = Matrix::from_fn(5, 5, |i, j| {
            ((3 * i + 7 * j) as f64).cos() + if i == j { 0.5 } else { 0.0 }
        });
        let (q, r) = qr(&m).unwrap();
        assert!(orthogonality_deviation(&q) < 1e-13);
        assert!(q.matmul(&r).unwrap().max_abs_diff(&m) < 1e-13);
        for i in 1..5 {
            for j in 0..i {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
    }
}
