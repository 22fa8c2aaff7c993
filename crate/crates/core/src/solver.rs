//! Matching-stretching-projection (MSP) iterations on the orthogonal group.
//!
//! Every update has the form `A ← P_O(n)[G]` where `G` is (a positive
//! multiple of) the gradient of the ℓ^{2k} objective. Infinite-step updates
//! omit the constant `2k`.
//!
//! Iterations stop on the step displacement `‖A_{t+1} − A_t‖_F / √n`; the
//! ground-truth dictionary, when supplied, is only used to enrich the trace.

use alloc::format;
use alloc::vec::Vec;

use crate::linalg::{project_orthogonal, Matrix, OrthogonalMatrix};
use crate::{Error, Result};

/// Step size of projected gradient ascent. `Infinite` is the MSP update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Finite(f64),
    Infinite,
}

impl StepSize {
    pub fn is_infinite(&self) -> bool {
        matches!(self, StepSize::Infinite)
    }
}

impl core::str::FromStr for StepSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinite") || t.eq_ignore_ascii_case("infinity") {
            return Ok(StepSize::Infinite);
        }
        match t.parse::<f64>() {
            Ok(a) if a.is_infinite() && a > 0.0 => Ok(StepSize::Infinite),
            Ok(a) if a > 0.0 => Ok(StepSize::Finite(a)),
            _ => Err(Error::InvalidParameter(format!(
                "step size {s:?} must be a positive number or `inf`"
            ))),
        }
    }
}

impl core::fmt::Display for StepSize {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            StepSize::Finite(a) => write!(f, "{a}"),
            StepSize::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig {
    /// Even exponent `2k ≥ 4` of the objective `‖·‖_{2k}^{2k}`.
    pub order_2k: u32,
    pub step: StepSize,
    pub max_iters: usize,
    /// Stop once the step displacement drops below this.
    pub stop_tol: f64,
    /// Bias coefficient β; the dictionary-learning update subtracts `β/4 · A`.
    pub bias_beta: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            order_2k: 4,
            step: StepSize::Infinite,
            max_iters: 200,
            stop_tol: 1e-10,
            bias_beta: 0.0,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        check_order(self.order_2k)?;
        if !(self.stop_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "stop_tol = {} must be positive",
                self.stop_tol
            )));
        }
        if let StepSize::Finite(a) = self.step {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidParameter(format!("step size {a} must be positive")));
            }
        }
        if !(self.bias_beta >= 0.0 && self.bias_beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bias_beta = {} must be >= 0",
                self.bias_beta
            )));
        }
        if self.bias_beta != 0.0 && !self.step.is_infinite() {
            return Err(Error::InvalidParameter(
                "bias_beta requires an infinite step size".into(),
            ));
        }
        Ok(())
    }
}

fn check_order(order_2k: u32) -> Result<()> {
    if order_2k >= 4 && order_2k.is_multiple_of(2) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "order_2k = {order_2k} must be even and >= 4"
        )))
    }
}

/// Per-iteration record of a run. Index `t` of the objective vectors refers to
/// iterate `A_t` (so they hold `iters_used + 1` values); `displacement[t]` is
/// `‖A_{t+1} − A_t‖_F / √n`.
#[derive(Debug, Clone)]
pub struct SolveTrace {
    /// `‖A_t D_o‖₄⁴ / n`, empty when no reference dictionary is known.
    pub g_norm: Vec<f64>,
    /// `‖A_t Y‖₄⁴ / (3npθ)`, dictionary-learning runs only.
    pub fhat_norm: Vec<f64>,
    pub displacement: Vec<f64>,
    pub iters_used: usize,
    /// Whether the displacement criterion fired before `max_iters`.
    pub converged: bool,
    pub final_iterate: OrthogonalMatrix,
}

impl SolveTrace {
    pub fn final_g(&self) -> Option<f64> {
        self.g_norm.last().copied()
    }

    /// First iteration index whose `g_norm` reaches `threshold`.
    pub fn first_reaching(&self, threshold: f64) -> Option<usize> {
        self.g_norm.iter().position(|&g| g >= threshold)
    }
}

/// `‖A·D‖₄⁴ / n`, in `[1/n, 1]` for orthogonal `A·D`.
pub fn normalized_objective(a: &Matrix, d: &Matrix) -> f64 {
    if d.is_identity() {
        return a.l4_norm_4th() / a.rows() as f64;
    }
    let w = a.matmul(d).expect("matching dimensions");
    w.l4_norm_4th() / a.rows() as f64
}

fn displacement(a: &Matrix, b: &Matrix) -> f64 {
    a.frobenius_distance(b) / (a.rows() as f64).sqrt()
}

/// One MSP step for known `D`: `P[(A·D)^∘(2k−1) · Dᵀ]`.
pub fn msp_step_orth(a: &OrthogonalMatrix, d: &OrthogonalMatrix, order_2k: u32) -> Result<OrthogonalMatrix> {
    check_order(order_2k)?;
    if d.is_identity() && a.dim() == d.dim() {
        return project_orthogonal(&a.hadamard_power(order_2k - 1));
    }
    let w = a.matmul(d)?;
    project_orthogonal(&w.hadamard_power(order_2k - 1).matmul_transpose(d)?)
}

/// Iterates [`msp_step_orth`] from `a0`.
pub fn msp_orth(a0: &OrthogonalMatrix, d: &OrthogonalMatrix, cfg: &SolveConfig) -> Result<SolveTrace> {
    cfg.validate()?;
    let order = cfg.order_2k;
    run_loop(
        a0,
        cfg,
        |a| msp_step_orth(a, d, order),
        |a| (Some(normalized_objective(a, d)), None),
    )
}

/// One dictionary-learning MSP step: `P[(A·Y)^∘(2k−1) · Yᵀ − (β/4)·A]`.
pub fn msp_step_dl(a: &OrthogonalMatrix, y: &Matrix, order_2k: u32, bias_beta: f64) -> Result<OrthogonalMatrix> {
    check_order(order_2k)?;
    let z = a.matmul(y)?;
    dl_update(a, &z, y, order_2k, StepSize::Infinite, bias_beta)
}

fn dl_update(
    a: &Matrix,
    ay: &Matrix,
    y: &Matrix,
    order_2k: u32,
    step: StepSize,
    bias_beta: f64,
) -> Result<OrthogonalMatrix> {
    let grad = ay.hadamard_power(order_2k - 1).matmul_transpose(y)?;
    let target = match step {
        StepSize::Infinite if bias_beta == 0.0 => grad,
        StepSize::Infinite => grad.add_scaled(-bias_beta / 4.0, a)?,
        StepSize::Finite(alpha) => a.add_scaled(alpha * f64::from(order_2k), &grad)?,
    };
    project_orthogonal(&target)
}

/// Dictionary learning from data `y` (`n × p`). `theta` only normalizes the
/// `fhat_norm` trace; `truth` (the generating dictionary) fills `g_norm`.
///
/// With a finite step size this is projected gradient ascent on `‖AY‖_{2k}^{2k}`.
pub fn msp_dl(
    a0: &OrthogonalMatrix,
    y: &Matrix,
    theta: f64,
    cfg: &SolveConfig,
    truth: Option<&OrthogonalMatrix>,
) -> Result<SolveTrace> {
    cfg.validate()?;
    if y.rows() != a0.dim() {
        return Err(Error::DimensionMismatch {
            op: "msp_dl",
            lhs: a0.shape(),
            rhs: y.shape(),
        });
    }
    let (n, p) = y.shape();
    let fhat_scale = 1.0 / (3.0 * n as f64 * p as f64 * theta);
    let mut a = a0.clone();
    let mut trace = SolveTrace {
        g_norm: Vec::new(),
        fhat_norm: Vec::new(),
        displacement: Vec::new(),
        iters_used: 0,
        converged: false,
        final_iterate: a0.clone(),
    };
    let mut ay = a.matmul(y)?;
    let record = |trace: &mut SolveTrace, a: &OrthogonalMatrix, ay: &Matrix| {
        trace.fhat_norm.push(ay.l4_norm_4th() * fhat_scale);
        if let Some(d) = truth {
            trace.g_norm.push(normalized_objective(a, d));
        }
    };
    record(&mut trace, &a, &ay);
    for _ in 0..cfg.max_iters {
        let next = dl_update(&a, &ay, y, cfg.order_2k, cfg.step, cfg.bias_beta)?;
        let disp = displacement(&next, &a);
        a = next;
        ay = a.matmul(y)?;
        trace.displacement.push(disp);
        trace.iters_used += 1;
        record(&mut trace, &a, &ay);
        if disp < cfg.stop_tol {
            trace.converged = true;
            break;
        }
    }
    trace.final_iterate = a;
    Ok(trace)
}

/// One projected-gradient step for `max ‖A‖_{2k}^{2k}` over O(n):
/// `P[A + 2k·α·A^∘(2k−1)]`, or `P[A^∘(2k−1)]` for an infinite step.
pub fn pga_step(a: &OrthogonalMatrix, step: StepSize, order_2k: u32) -> Result<OrthogonalMatrix> {
    check_order(order_2k)?;
    let stretched = a.hadamard_power(order_2k - 1);
    match step {
        StepSize::Infinite => project_orthogonal(&stretched),
        StepSize::Finite(alpha) => {
            if !(alpha > 0.0) {
                return Err(Error::InvalidParameter(format!("step size {alpha} must be positive")));
            }
            project_orthogonal(&a.add_scaled(f64::from(order_2k) * alpha, &stretched)?)
        }
    }
}

/// Iterates [`pga_step`] with `cfg.step`; the reference dictionary is `I`.
pub fn pga_run(a0: &OrthogonalMatrix, cfg: &SolveConfig) -> Result<SolveTrace> {
    cfg.validate()?;
    let n = a0.dim() as f64;
    run_loop(
        a0,
        cfg,
        |a| pga_step(a, cfg.step, cfg.order_2k),
        |a| (Some(a.l4_norm_4th() / n), None),
    )
}

fn run_loop(
    a0: &OrthogonalMatrix,
    cfg: &SolveConfig,
    step: impl Fn(&OrthogonalMatrix) -> Result<OrthogonalMatrix>,
    objectives: impl Fn(&OrthogonalMatrix) -> (Option<f64>, Option<f64>),
) -> Result<SolveTrace> {
    let mut trace = SolveTrace {
        g_norm: Vec::new(),
        fhat_norm: Vec::new(),
        displacement: Vec::new(),
        iters_used: 0,
        converged: false,
        final_iterate: a0.clone(),
    };
    let record = |trace: &mut SolveTrace, a: &OrthogonalMatrix| {
        let (g, f) = objectives(a);
        trace.g_norm.extend(g);
        trace.fhat_norm.extend(f);
    };
    let mut a = a0.clone();
    record(&mut trace, &a);
    for _ in 0..cfg.max_iters {
        let next = step(&a)?;
        let disp = displacement(&next, &a);
        a = next;
        trace.displacement.push(disp);
        trace.iters_used += 1;
        record(&mut trace, &a);
        if disp < cfg.stop_tol {
            trace.converged = true;
            break;
        }
    }
    trace.final_iterate = a;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SignedPermutation;

    fn example1_a0() -> OrthogonalMatrix {
        let m = Matrix::from_rows(&[
            [-0.8249, 0.3820, -0.4168],
            [-0.5240, -0.2398, 0.8173],
            [-0.2122, -0.8925, -0.3979],
        ])
        .unwrap();
        OrthogonalMatrix::with_tol(m, 1e-3).unwrap()
    }

    #[test]
    fn example1_first_step() {
        let a1 = Matrix::from_rows(&[
            [-0.9795, 0.0621, -0.1917],
            [-0.1953, -0.0594, 0.9789],
            [-0.0494, -0.9963, -0.0703],
        ])
        .unwrap();
        let got = msp_step_orth(&example1_a0(), &OrthogonalMatrix::identity(3), 4).unwrap();
        assert!(got.max_abs_diff(&a1) <= 5e-5);
    }

    #[test]
    fn signed_permutation_is_fixed() {
        let p = SignedPermutation::new(alloc::vec![2, 0, 1], alloc::vec![-1, 1, -1])
            .unwrap()
            .to_matrix();
        let id = OrthogonalMatrix::identity(3);
        for order in [4, 6, 10] {
            assert!(msp_step_orth(&p, &id, order).unwrap().max_abs_diff(&p) < 1e-15);
        }
        for step in [StepSize::Finite(0.1), StepSize::Finite(10.0), StepSize::Infinite] {
            assert!(pga_step(&p, step, 4).unwrap().max_abs_diff(&p) < 1e-15);
        }
        let trace = msp_orth(&p, &id, &SolveConfig::default()).unwrap();
        assert_eq!(trace.iters_used, 1);
        assert_eq!(trace.displacement[0], 0.0);
        assert!(trace.converged);
    }

    #[test]
    fn rotation_follows_tangent_cube() {
        let phi = core::f64::consts::FRAC_PI_8;
        let next = msp_step_orth(&OrthogonalMatrix::rotation2(phi), &OrthogonalMatrix::identity(2), 4).unwrap();
        let expected = phi.tan().powi(3).atan();
        assert!((expected - 0.070_948_527_302_081_95).abs() < 1e-7);
        assert!(next.max_abs_diff(&OrthogonalMatrix::rotation2(expected)) < 1e-14);
    }

    #[test]
    fn hadamard_is_fixed_for_every_step() {
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let had = OrthogonalMatrix::new(Matrix::from_rows(&[[h, h], [h, -h]]).unwrap()).unwrap();
        for step in [
            StepSize::Finite(0.01),
            StepSize::Finite(1.0),
            StepSize::Finite(100.0),
            StepSize::Infinite,
        ] {
            assert!(pga_step(&had, step, 4).unwrap().max_abs_diff(&had) < 1e-14);
        }
    }

    #[test]
    fn infinite_pga_equals_msp() {
        let a = example1_a0();
        let id = OrthogonalMatrix::identity(3);
        assert_eq!(
            pga_step(&a, StepSize::Infinite, 4).unwrap(),
            msp_step_orth(&a, &id, 4).unwrap()
        );
    }

    #[test]
    fn identity_data_collapses_updates() {
        let a = example1_a0();
        let id = OrthogonalMatrix::identity(3);
        let dl = msp_step_dl(&a, &Matrix::identity(3), 4, 0.0).unwrap();
        assert_eq!(dl, msp_step_orth(&a, &id, 4).unwrap());
    }

    #[test]
    fn config_validation() {
        let base = SolveConfig::default();
        assert!(base.validate().is_ok());
        assert!(SolveConfig { order_2k: 5, ..base }.validate().is_err());
        assert!(SolveConfig { order_2k: 2, ..base }.validate().is_err());
        assert!(SolveConfig { stop_tol: 0.0, ..base }.validate().is_err());
        assert!(SolveConfig {
            step: StepSize::Finite(-1.0),
            ..base
        }
        .validate()
        .is_err());
        assert!(SolveConfig {
            step: StepSize::Finite(1.0),
            bias_beta: 1.0,
            ..base
        }
        .validate()
        .is_err());
        assert!(SolveConfig { bias_beta: 1.0, ..base }.validate().is_ok());
    }

    #[test]
    fn step_size_parsing() {
        assert_eq!("inf".parse::<StepSize>().unwrap(), StepSize::Infinite);
        assert_eq!("Infinity".parse::<StepSize>().unwrap(), StepSize::Infinite);
        assert_eq!("10".parse::<StepSize>().unwrap(), StepSize::Finite(10.0));
        assert!("0".parse::<StepSize>().is_err());
        assert!("abc".parse::<StepSize>().is_err());
    }
}
