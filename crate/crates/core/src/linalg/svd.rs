//! One-sided (Hestenes) Jacobi SVD.
//!
//! The rows of the input are rotated pairwise until mutually orthogonal.
//! The accumulated rotations form the left singular vectors and the row
//! norms are the singular values. Rows are contiguous in [`Matrix`], so every
//! rotation touches contiguous memory.

use alloc::vec;
use alloc::vec::Vec;

use super::matrix::dot;
use super::{Matrix, OrthogonalMatrix};
use crate::{Error, Result};

/// `M = U · diag(σ) · Vᵀ` with σ sorted in descending order.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: OrthogonalMatrix,
    pub sigma: Vec<f64>,
    pub v: OrthogonalMatrix,
}

impl SvdResult {
    /// `U · diag(σ) · Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let us = Matrix::from_fn(self.u.rows(), self.u.cols(), |i, j| self.u[(i, j)] * self.sigma[j]);
        us.matmul_transpose(&self.v).expect("square factors")
    }
}

/// Singular value decomposition of a square matrix.
pub fn svd(m: &Matrix) -> Result<SvdResult> {
    if !m.is_square() {
        return Err(Error::NotSquare(m.rows(), m.cols()));
    }
    let n = m.rows();
    let rot = RowJacobi::run(m, true)?;
    let order = rot.descending_order();

    let sigma: Vec<f64> = order.iter().map(|&j| rot.norms[j]).collect();
    let cutoff = rank_cutoff(&sigma, n);

    // Left factor: columns are the accumulated rotation rows.
    let u = Matrix::from_fn(n, n, |i, col| rot.acc[order[col] * n + i]);

    // Right factor: normalized rotated rows, completed where σ is negligible.
    let mut vcols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut missing = 0;
    for (&j, &s) in order.iter().zip(&sigma) {
        if s > cutoff {
            let row = &rot.rows[j * n..(j + 1) * n];
            vcols.push(row.iter().map(|&x| x / s).collect());
        } else {
            missing += 1;
        }
    }
    complete_orthonormal(&mut vcols, n, missing);
    let v = Matrix::from_fn(n, n, |i, col| vcols[col][i]);

    Ok(SvdResult {
        u: OrthogonalMatrix::new(u)?,
        sigma,
        v: OrthogonalMatrix::new(v)?,
    })
}

/// Left singular vectors and singular values of a wide matrix (`rows ≤ cols`).
///
/// Also returns the normalized right singular vectors as rows (`rows × cols`),
/// so that `M = U · diag(σ) · Vtᵀ` with `Vt` the returned row block. Rows whose
/// singular value is below the rank cutoff are left as zero.
pub fn svd_wide(m: &Matrix) -> Result<(OrthogonalMatrix, Vec<f64>, Matrix)> {
    let (k, len) = m.shape();
    if k > len {
        return Err(Error::DimensionMismatch {
            op: "svd_wide",
            lhs: m.shape(),
            rhs: (len, k),
        });
    }
    let rot = RowJacobi::run(m, true)?;
    let order = rot.descending_order();
    let sigma: Vec<f64> = order.iter().map(|&j| rot.norms[j]).collect();
    let cutoff = rank_cutoff(&sigma, len);
    let u = Matrix::from_fn(k, k, |i, col| rot.acc[order[col] * k + i]);
    let mut vt = Matrix::zeros(k, len);
    for (pos, (&j, &s)) in order.iter().zip(&sigma).enumerate() {
        if s > cutoff {
            for (o, &x) in vt.row_mut(pos).iter_mut().zip(&rot.rows[j * len..(j + 1) * len]) {
                *o = x / s;
            }
        }
    }
    Ok((OrthogonalMatrix::new(u)?, sigma, vt))
}

/// Orthogonal polar factor of a square matrix together with its extreme
/// singular values `(σ_min, σ_max)`; `None` when the condition number exceeds
/// `max_cond`.
///
/// Only the rotated rows `W = Σ·Vᵀ` are formed, and the factor is assembled as
/// `M · V Σ⁻¹ Vᵀ = M · Wᵀ Σ⁻³ W`. The rounding error grows with the condition
/// number, hence the cap.
pub(crate) fn polar_right_only(m: &Matrix, max_cond: f64) -> Result<(Option<Matrix>, f64, f64)> {
    let n = m.rows();
    let rot = RowJacobi::run(m, false)?;
    let smax = rot.norms.iter().copied().fold(0.0, f64::max);
    let smin = rot.norms.iter().copied().fold(f64::INFINITY, f64::min);
    if !(smin * max_cond > smax) {
        return Ok((None, smin, smax));
    }
    let mut b = vec![0.0; n * n];
    for j in 0..n {
        let w = &rot.rows[j * n..(j + 1) * n];
        let scale = 1.0 / (rot.norms[j] * rot.norms[j] * rot.norms[j]);
        for (r, &wr) in w.iter().enumerate() {
            let c = wr * scale;
            for (o, &wc) in b[r * n..(r + 1) * n].iter_mut().zip(w) {
                *o += c * wc;
            }
        }
    }
    let p = m.matmul(&Matrix::from_raw(n, n, b))?;
    Ok((Some(p), smin, smax))
}

fn rank_cutoff(sorted_sigma: &[f64], len: usize) -> f64 {
    let smax = sorted_sigma.first().copied().unwrap_or(0.0);
    smax * (len as f64) * f64::EPSILON
}

struct RowJacobi {
    /// Rotated rows, `k × len`.
    rows: Vec<f64>,
    /// Accumulated rotations, `k × k` (empty unless requested); row `j` is the
    /// `j`-th left singular vector.
    acc: Vec<f64>,
    /// Row norms after convergence.
    norms: Vec<f64>,
}

impl RowJacobi {
    fn run(m: &Matrix, accumulate: bool) -> Result<Self> {
        let (k, len) = m.shape();
        // Start from rows sorted by decreasing norm; fewer sweeps on average.
        let mut start: Vec<(f64, usize)> = (0..k).map(|i| (dot(m.row(i), m.row(i)), i)).collect();
        start.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut rows = Vec::with_capacity(k * len);
        for &(_, i) in &start {
            rows.extend_from_slice(m.row(i));
        }
        let mut acc = vec![0.0; if accumulate { k * k } else { 0 }];
        if accumulate {
            for (pos, &(_, i)) in start.iter().enumerate() {
                acc[pos * k + i] = 1.0;
            }
        }
        let max_sweeps = 30 * k * k;
        let tol = 8.0 * f64::EPSILON * (len as f64).sqrt();
        let mut sq = vec![0.0; k];
        let mut converged = k < 2;
        for _ in 0..max_sweeps {
            if converged {
                break;
            }
            for (j, s) in sq.iter_mut().enumerate() {
                let r = &rows[j * len..(j + 1) * len];
                *s = dot(r, r);
            }
            let mut rotated = false;
            for j in 0..k - 1 {
                for l in j + 1..k {
                    let (alpha, beta) = (sq[j], sq[l]);
                    if alpha <= f64::MIN_POSITIVE || beta <= f64::MIN_POSITIVE {
                        continue;
                    }
                    let (head, tail) = rows.split_at_mut(l * len);
                    let rj = &mut head[j * len..(j + 1) * len];
                    let rl = &mut tail[..len];
                    let gamma = dot(rj, rl);
                    if gamma.abs() <= tol * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    rotate(rj, rl, c, s);
                    if accumulate {
                        let (ah, at) = acc.split_at_mut(l * k);
                        rotate(&mut ah[j * k..(j + 1) * k], &mut at[..k], c, s);
                    }
                    sq[j] = alpha - t * gamma;
                    sq[l] = beta + t * gamma;
                }
            }
            converged = !rotated;
        }
        if !converged {
            return Err(Error::NonConvergence { sweeps: max_sweeps });
        }
        let norms = (0..k)
            .map(|j| {
                let r = &rows[j * len..(j + 1) * len];
                dot(r, r).sqrt()
            })
            .collect();
        Ok(Self { rows, acc, norms })
    }

    fn descending_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.norms.len()).collect();
        // Stable: equal singular values keep their original order.
        order.sort_by(|&a, &b| self.norms[b].total_cmp(&self.norms[a]));
        order
    }
}

#[inline]
fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

/// Extends `basis` (orthonormal vectors of length `n`) with `missing` further
/// orthonormal vectors, drawing from the standard basis with the largest
/// residual first.
pub(crate) fn complete_orthonormal(basis: &mut Vec<Vec<f64>>, n: usize, missing: usize) {
    for _ in 0..missing {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for e in 0..n {
            let mut cand = vec![0.0; n];
            cand[e] = 1.0;
            for _ in 0..2 {
                for b in basis.iter() {
                    let proj = dot(&cand, b);
                    for (c, &bv) in cand.iter_mut().zip(b) {
                        *c -= proj * bv;
                    }
                }
            }
            let norm = dot(&cand, &cand).sqrt();
            if best.as_ref().is_none_or(|(bn, _)| norm > *bn) {
                best = Some((norm, cand));
            }
        }
        let (norm, mut cand) = best.expect("n >= 1");
        for c in cand.iter_mut() {
            *c /= norm;
        }
        basis.push(cand);
    }
}
