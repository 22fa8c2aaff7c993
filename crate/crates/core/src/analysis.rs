//! Closed-form oracles for the ℓ⁴ objective and checks of the fixed-point
//! theory.

use alloc::vec::Vec;

use rand::Rng;

use crate::linalg::{nearest_signed_permutation, Matrix, OrthogonalMatrix};
use crate::model::{gen_bernoulli_gaussian, gen_haar_orthogonal};
use crate::solver::msp_step_orth;
use crate::{Error, Result};

use core::f64::consts::FRAC_PI_2;

/// Monte-Carlo estimate next to its closed-form prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectationReport {
    pub empirical: f64,
    pub predicted: f64,
    pub abs_error: f64,
    pub samples_used: usize,
}

impl ExpectationReport {
    pub fn new(empirical: f64, predicted: f64, samples_used: usize) -> Self {
        Self {
            empirical,
            predicted,
            abs_error: (empirical - predicted).abs(),
            samples_used,
        }
    }

    pub fn rel_error(&self) -> f64 {
        self.abs_error / self.predicted.abs()
    }
}

/// `E‖A·D·X‖₄⁴` for `X ~ BG(θ)` with `p` columns:
/// `3pθ · ((1 − θ)·‖AD‖₄⁴ + θn)`.
pub fn expected_objective(a: &Matrix, d: &Matrix, theta: f64, p: usize) -> f64 {
    let w = a.matmul(d).expect("matching dimensions");
    let n = w.rows() as f64;
    let p = p as f64;
    3.0 * p * theta * ((1.0 - theta) * w.l4_norm_4th() + theta * n)
}

/// `E[4(AY)^∘3 Yᵀ]` for `Y = D X`, `X ~ BG(θ)`:
/// `3pθ(1 − θ) · 4(AD)^∘3 Dᵀ + 12pθ² · A`.
pub fn expected_gradient(a: &Matrix, d: &Matrix, theta: f64, p: usize) -> Matrix {
    let w = a.matmul(d).expect("matching dimensions");
    let grad_g = w.hadamard_power(3).matmul_transpose(d).expect("square").scale(4.0);
    let p = p as f64;
    grad_g
        .scale(3.0 * p * theta * (1.0 - theta))
        .add_scaled(12.0 * p * theta * theta, a)
        .expect("same shape")
}

/// One Monte-Carlo draw of `‖A·D·X‖₄⁴` against [`expected_objective`].
pub fn sample_objective<R: Rng + ?Sized>(
    a: &Matrix,
    d: &Matrix,
    theta: f64,
    p: usize,
    rng: &mut R,
) -> Result<ExpectationReport> {
    let x = gen_bernoulli_gaussian(d.cols(), p, theta, rng)?;
    let empirical = a.matmul(d)?.matmul(&x)?.l4_norm_4th();
    Ok(ExpectationReport::new(empirical, expected_objective(a, d, theta, p), p))
}

/// Average of `4(AY)^∘3 Yᵀ` over `reps` independent data sets; returns the
/// average and the relative Frobenius error against [`expected_gradient`].
pub fn sample_gradient<R: Rng + ?Sized>(
    a: &Matrix,
    d: &Matrix,
    theta: f64,
    p: usize,
    reps: usize,
    rng: &mut R,
) -> Result<(Matrix, f64)> {
    let n = a.rows();
    let mut acc = Matrix::zeros(n, n);
    for _ in 0..reps.max(1) {
        let y = d.matmul(&gen_bernoulli_gaussian(d.cols(), p, theta, rng)?)?;
        let g = a.matmul(&y)?.hadamard_power(3).matmul_transpose(&y)?.scale(4.0);
        acc = acc.add(&g)?;
    }
    let mean = acc.scale(1.0 / reps.max(1) as f64);
    let predicted = expected_gradient(a, d, theta, p);
    let rel = mean.frobenius_distance(&predicted) / predicted.frobenius_norm();
    Ok((mean, rel))
}

/// `‖(W^∘3)ᵀW − WᵀW^∘3‖_F`; zero exactly at critical points of `‖W‖₄⁴` on
/// the orthogonal group.
pub fn critical_point_residual(w: &Matrix) -> f64 {
    let w3 = w.hadamard_power(3);
    let lhs = w3.transpose().matmul(w).expect("square");
    let rhs = w.transpose().matmul(&w3).expect("square");
    lhs.frobenius_distance(&rhs)
}

/// Angle recurrence of MSP on SO(2): `θ ↦ arctan(tan³ θ)`, with `±π/2`
/// mapped to themselves.
pub fn tan_map(theta: f64) -> f64 {
    if theta.abs() >= FRAC_PI_2 {
        return theta.signum() * FRAC_PI_2;
    }
    theta.tan().powi(3).atan()
}

/// Angle of a 2×2 rotation, `atan2(w₁₀, w₀₀)`. Reflections are rejected.
pub fn rotation_angle(w: &Matrix) -> Result<f64> {
    if w.shape() != (2, 2) {
        return Err(Error::DimensionMismatch {
            op: "rotation_angle",
            lhs: w.shape(),
            rhs: (2, 2),
        });
    }
    let det = w[(0, 0)] * w[(1, 1)] - w[(0, 1)] * w[(1, 0)];
    if det <= 0.0 {
        return Err(Error::InvalidParameter(alloc::format!(
            "expected a rotation, got determinant {det}"
        )));
    }
    Ok(w[(1, 0)].atan2(w[(0, 0)]))
}

/// `|angle(MSP step of rotation(θ)) − tan_map(θ)|`.
pub fn verify_so2_equivalence(theta: f64) -> Result<f64> {
    let a = OrthogonalMatrix::rotation2(theta);
    let next = msp_step_orth(&a, &OrthogonalMatrix::identity(2), 4)?;
    Ok((rotation_angle(&next)? - tan_map(theta)).abs())
}

/// `(ε, ‖W − P‖_F²/n)` with `ε = 1 − ‖W‖₄⁴/n` and `P` the nearest signed
/// permutation. For orthogonal `W` the second value is at most `2ε`.
pub fn permutation_gap_check(w: &Matrix) -> (f64, f64) {
    let n = w.rows() as f64;
    let eps = 1.0 - w.l4_norm_4th() / n;
    let (_, dist) = nearest_signed_permutation(w);
    (eps, dist)
}

/// Deviation statistics of `‖WX‖₄⁴` from its mean at one sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationRow {
    pub p: usize,
    /// `|‖WX‖₄⁴ − E‖WX‖₄⁴| / (np)` for each trial.
    pub deviations: Vec<f64>,
    pub mean_deviation: f64,
    pub max_deviation: f64,
    /// `θ n² ln n / p`, the sample-complexity scale, for overlaying.
    pub scaling: f64,
}

/// Empirical concentration of the ℓ⁴ objective: for each `p`, draws `trials`
/// pairs of Haar `W` and `X ~ BG(θ)`. Trials run in grid order and each
/// consumes `rng` in turn.
pub fn concentration_probe<R: Rng + ?Sized>(
    n: usize,
    theta: f64,
    p_grid: &[usize],
    trials: usize,
    rng: &mut R,
) -> Result<Vec<ConcentrationRow>> {
    if p_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("p_grid must be strictly ascending".into()));
    }
    let id = Matrix::identity(n);
    let nf = n as f64;
    let mut rows = Vec::with_capacity(p_grid.len());
    for &p in p_grid {
        let mut deviations = Vec::with_capacity(trials);
        for _ in 0..trials {
            let w = gen_haar_orthogonal(n, rng)?;
            let report = sample_objective(&w, &id, theta, p, rng)?;
            deviations.push(report.abs_error / (nf * p as f64));
        }
        let mean_deviation = deviations.iter().sum::<f64>() / trials.max(1) as f64;
        let max_deviation = deviations.iter().copied().fold(0.0, f64::max);
        rows.push(ConcentrationRow {
            p,
            deviations,
            mean_deviation,
            max_deviation,
            scaling: theta * nf * nf * nf.ln() / p as f64,
        });
    }
    Ok(rows)
}

/// The constant `4 / (3θ(1 − θ))` that relates the objective gap to the
/// distance from a signed permutation at the population optimum.
pub fn recovery_constant(theta: f64) -> f64 {
    4.0 / (3.0 * theta * (1.0 - theta))
}
