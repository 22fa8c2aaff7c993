//! Batch experiments on synthetic data: convergence traces, phase-transition
//! grids, ℓ^{2k} sweeps and the projected-gradient step-size table.
//!
//! Every trial derives its own seed from the base seed, so results do not
//! depend on scheduling. Work fans out over the current rayon pool and is
//! collected in (cell, trial) order; CSV output is byte-identical across runs.

use std::time::Instant;

use l4dict_core::analysis::recovery_constant;
use l4dict_core::linalg::nearest_signed_permutation;
use l4dict_core::model::{gen_haar_orthogonal, seeded_rng, synthesize_from_rng, trial_seed};
use l4dict_core::solver::{msp_dl, msp_orth, pga_run};
use l4dict_core::{ModelParams, OrthogonalMatrix, SolveConfig, SolveTrace, StepSize};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io::{csv_bytes, fmt_opt, IoError};

/// Trials at or above this normalized error count as failures.
pub const SUCCESS_THRESHOLD: f64 = 0.01;

/// Serializable mirror of [`SolveConfig`]. `alpha: None` is the infinite step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    pub order_2k: u32,
    pub alpha: Option<f64>,
    pub max_iters: usize,
    pub stop_tol: f64,
    pub bias_beta: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolveConfig::default().into()
    }
}

impl From<SolveConfig> for SolverSettings {
    fn from(c: SolveConfig) -> Self {
        Self {
            order_2k: c.order_2k,
            alpha: match c.step {
                StepSize::Finite(a) => Some(a),
                StepSize::Infinite => None,
            },
            max_iters: c.max_iters,
            stop_tol: c.stop_tol,
            bias_beta: c.bias_beta,
        }
    }
}

impl SolverSettings {
    pub fn to_config(&self) -> l4dict_core::Result<SolveConfig> {
        let cfg = SolveConfig {
            order_2k: self.order_2k,
            step: self.alpha.map_or(StepSize::Infinite, StepSize::Finite),
            max_iters: self.max_iters,
            stop_tol: self.stop_tol,
            bias_beta: self.bias_beta,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `|1 − g|` for the final normalized objective of a trace.
pub fn normalized_error(trace: &SolveTrace) -> f64 {
    trace.final_g().map_or(1.0, |g| (1.0 - g).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvergenceMode {
    /// Known dictionary `D = I`, Haar start, no data.
    Orthogonal,
    /// Synthetic data `Y = D_o X_o`, Haar start.
    DictionaryLearning,
}

#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub outcome: Result<SolveTrace, String>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceRun {
    pub mode: ConvergenceMode,
    pub records: Vec<TrialRecord>,
}

impl ConvergenceRun {
    /// Columns `trial,iter,g_norm,fhat_norm`; failed trials contribute no rows.
    pub fn csv(&self) -> Result<Vec<u8>, IoError> {
        let mut rows = Vec::new();
        for rec in &self.records {
            let Ok(trace) = &rec.outcome else { continue };
            for t in 0..=trace.iters_used {
                rows.push(vec![
                    rec.trial.to_string(),
                    t.to_string(),
                    fmt_opt(trace.g_norm.get(t).copied()),
                    fmt_opt(trace.fhat_norm.get(t).copied()),
                ]);
            }
        }
        csv_bytes(&["trial", "iter", "g_norm", "fhat_norm"], rows)
    }

    pub fn final_g(&self) -> Vec<Option<f64>> {
        self.records
            .iter()
            .map(|r| r.outcome.as_ref().ok().and_then(SolveTrace::final_g))
            .collect()
    }

    pub fn failures(&self) -> impl Iterator<Item = (usize, &str)> {
        self.records
            .iter()
            .filter_map(|r| r.outcome.as_ref().err().map(|e| (r.trial, e.as_str())))
    }
}

/// Runs `trials` independent solves; trial `t` uses seed `params.seed ^ t`.
pub fn run_convergence(
    params: &ModelParams,
    cfg: &SolveConfig,
    trials: usize,
    mode: ConvergenceMode,
) -> Result<ConvergenceRun, l4dict_core::Error> {
    params.validate()?;
    cfg.validate()?;
    let records = (0..trials)
        .into_par_iter()
        .map(|t| {
            let seed = trial_seed(params.seed, t as u64);
            let outcome = convergence_trial(params, cfg, seed, mode).map_err(|e| e.to_string());
            if let Err(e) = &outcome {
                log::warn!("trial {t} failed: {e}");
            }
            TrialRecord {
                trial: t,
                seed,
                outcome,
            }
        })
        .collect();
    Ok(ConvergenceRun { mode, records })
}

fn convergence_trial(
    params: &ModelParams,
    cfg: &SolveConfig,
    seed: u64,
    mode: ConvergenceMode,
) -> l4dict_core::Result<SolveTrace> {
    let mut rng = seeded_rng(seed);
    match mode {
        ConvergenceMode::Orthogonal => {
            let a0 = gen_haar_orthogonal(params.n, &mut rng)?;
            pga_run(&a0, cfg)
        }
        ConvergenceMode::DictionaryLearning => {
            let p = ModelParams { seed, ..*params };
            let bundle = synthesize_from_rng(&p, &mut rng)?;
            let a0 = gen_haar_orthogonal(p.n, &mut rng)?;
            msp_dl(&a0, &bundle.observations, p.theta, cfg, Some(&bundle.dictionary))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisKind {
    N,
    P,
    Theta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub kind: AxisKind,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn new(kind: AxisKind, values: Vec<f64>) -> Self {
        Self { kind, values }
    }
}

/// Model parameters held fixed across a grid; axis values override them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedParams {
    pub n: usize,
    pub p: usize,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axis1: Axis,
    pub axis2: Axis,
    pub fixed: FixedParams,
    pub trials: usize,
    pub cfg: SolverSettings,
    pub base_seed: u64,
}

impl GridSpec {
    pub fn validate(&self) -> l4dict_core::Result<SolveConfig> {
        use l4dict_core::Error::InvalidParameter;
        if self.axis1.values.is_empty() || self.axis2.values.is_empty() {
            return Err(InvalidParameter("grid axes must be nonempty".into()));
        }
        if self.axis1.kind == self.axis2.kind {
            return Err(InvalidParameter("grid axes must differ".into()));
        }
        if self.trials == 0 {
            return Err(InvalidParameter("trials must be at least 1".into()));
        }
        for &a in &self.axis1.values {
            for &b in &self.axis2.values {
                self.params_at(a, b, 0)?;
            }
        }
        self.cfg.to_config()
    }

    fn params_at(&self, a: f64, b: f64, seed: u64) -> l4dict_core::Result<ModelParams> {
        let mut n = self.fixed.n;
        let mut p = self.fixed.p;
        let mut theta = self.fixed.theta;
        for (axis, v) in [(&self.axis1, a), (&self.axis2, b)] {
            match axis.kind {
                AxisKind::N => n = as_count(v)?,
                AxisKind::P => p = as_count(v)?,
                AxisKind::Theta => theta = v,
            }
        }
        ModelParams::new(n, p, theta, seed)
    }
}

fn as_count(v: f64) -> l4dict_core::Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(l4dict_core::Error::InvalidParameter(format!(
            "{v} is not a positive integer"
        )))
    }
}

/// Seed of trial `trial` in grid cell `cell`.
pub fn cell_seed(base: u64, cell: usize, trial: usize) -> u64 {
    base ^ ((cell as u64) << 32) ^ trial as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub axis1: f64,
    pub axis2: f64,
    /// Per-trial `|1 − ‖A D_o‖₄⁴ / n|`; failed solves count as 1.
    pub errors: Vec<f64>,
    pub mean_error: f64,
    pub success_rate: f64,
    /// Solver errors in this cell.
    pub failures: usize,
    /// Successful trials violating `dist²/n ≤ C(θ)·(1 − g) + 1e-6`.
    pub bound_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub cells: Vec<CellResult>,
    pub wall_time_s: f64,
}

impl GridResult {
    /// Columns `axis1,axis2,mean_error,success_rate`.
    pub fn csv(&self) -> Result<Vec<u8>, IoError> {
        let rows = self.cells.iter().map(|c| {
            vec![
                format!("{:?}", c.axis1),
                format!("{:?}", c.axis2),
                format!("{:?}", c.mean_error),
                format!("{:?}", c.success_rate),
            ]
        });
        csv_bytes(&["axis1", "axis2", "mean_error", "success_rate"], rows)
    }

    pub fn cell(&self, axis1: f64, axis2: f64) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.axis1 == axis1 && c.axis2 == axis2)
    }
}

struct GridTrial {
    error: f64,
    failed: bool,
    violates_bound: bool,
}

pub fn run_phase_transition(spec: &GridSpec) -> l4dict_core::Result<GridResult> {
    let cfg = spec.validate()?;
    let start = Instant::now();
    let cells: Vec<(f64, f64)> = spec
        .axis1
        .values
        .iter()
        .flat_map(|&a| spec.axis2.values.iter().map(move |&b| (a, b)))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..spec.trials).map(move |t| (c, t)))
        .collect();
    let outcomes: Vec<GridTrial> = jobs
        .par_iter()
        .map(|&(c, t)| {
            let (a, b) = cells[c];
            let seed = cell_seed(spec.base_seed, c, t);
            match grid_trial(spec, &cfg, a, b, seed) {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("cell ({a}, {b}) trial {t} failed: {e}");
                    GridTrial {
                        error: 1.0,
                        failed: true,
                        violates_bound: false,
                    }
                }
            }
        })
        .collect();
    let cells = cells
        .iter()
        .zip(outcomes.chunks(spec.trials))
        .map(|(&(a, b), chunk)| {
            let errors: Vec<f64> = chunk.iter().map(|r| r.error).collect();
            let k = errors.len() as f64;
            CellResult {
                axis1: a,
                axis2: b,
                mean_error: errors.iter().sum::<f64>() / k,
                success_rate: errors.iter().filter(|&&e| e < SUCCESS_THRESHOLD).count() as f64 / k,
                errors,
                failures: chunk.iter().filter(|r| r.failed).count(),
                bound_violations: chunk.iter().filter(|r| r.violates_bound).count(),
            }
        })
        .collect();
    Ok(GridResult {
        cells,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn grid_trial(spec: &GridSpec, cfg: &SolveConfig, a: f64, b: f64, seed: u64) -> l4dict_core::Result<GridTrial> {
    let params = spec.params_at(a, b, seed)?;
    let mut rng = seeded_rng(seed);
    let bundle = synthesize_from_rng(&params, &mut rng)?;
    let a0 = gen_haar_orthogonal(params.n, &mut rng)?;
    let trace = msp_dl(&a0, &bundle.observations, params.theta, cfg, Some(&bundle.dictionary))?;
    let error = normalized_error(&trace);
    let mut violates_bound = false;
    if error < SUCCESS_THRESHOLD {
        let g = trace.final_g().unwrap_or(0.0);
        let w = trace.final_iterate.matmul(&bundle.dictionary)?;
        let (_, dist) = nearest_signed_permutation(&w);
        violates_bound = dist > recovery_constant(params.theta) * (1.0 - g) + 1e-6;
    }
    Ok(GridTrial {
        error,
        failed: false,
        violates_bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub n: usize,
    pub theta: f64,
    pub p_grid: Vec<usize>,
    /// Even exponents `2k`.
    pub orders: Vec<u32>,
    pub trials: usize,
    pub cfg: SolverSettings,
    /// Threshold `1 − g` for counting iterations in the known-dictionary case.
    pub det_tol: f64,
    pub base_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub order_2k: u32,
    pub p: usize,
    pub mean_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub errors: Vec<SweepCell>,
    /// `(2k, iterations)` from the shared start with `D = I`; `None` if the
    /// threshold was never reached.
    pub iterations: Vec<(u32, Option<usize>)>,
}

impl SweepResult {
    /// Columns `order_2k,p,mean_error`.
    pub fn errors_csv(&self) -> Result<Vec<u8>, IoError> {
        let rows = self
            .errors
            .iter()
            .map(|c| vec![c.order_2k.to_string(), c.p.to_string(), format!("{:?}", c.mean_error)]);
        csv_bytes(&["order_2k", "p", "mean_error"], rows)
    }

    /// Columns `order_2k,iterations`; `-1` marks a run that never reached the threshold.
    pub fn iterations_csv(&self) -> Result<Vec<u8>, IoError> {
        let rows = self
            .iterations
            .iter()
            .map(|&(k, it)| vec![k.to_string(), it.map_or("-1".into(), |i| i.to_string())]);
        csv_bytes(&["order_2k", "iterations"], rows)
    }

    pub fn error_at(&self, order_2k: u32, p: usize) -> Option<f64> {
        self.errors
            .iter()
            .find(|c| c.order_2k == order_2k && c.p == p)
            .map(|c| c.mean_error)
    }
}

/// Mean normalized error per `(2k, p)` on synthetic data, plus iteration
/// counts with a known dictionary. Every order sees the same data sets.
pub fn run_2k_sweep(spec: &SweepSpec) -> l4dict_core::Result<SweepResult> {
    let base_cfg = spec.cfg.to_config()?;
    if spec.trials == 0 || spec.p_grid.is_empty() || spec.orders.is_empty() {
        return Err(l4dict_core::Error::InvalidParameter("empty sweep".into()));
    }
    let configs: Vec<SolveConfig> = spec
        .orders
        .iter()
        .map(|&k| {
            let cfg = SolveConfig {
                order_2k: k,
                ..base_cfg
            };
            cfg.validate().map(|_| cfg)
        })
        .collect::<l4dict_core::Result<_>>()?;
    for &p in &spec.p_grid {
        ModelParams::new(spec.n, p, spec.theta, 0)?;
    }

    let jobs: Vec<(usize, usize, usize)> = (0..configs.len())
        .flat_map(|o| (0..spec.p_grid.len()).flat_map(move |pi| (0..spec.trials).map(move |t| (o, pi, t))))
        .collect();
    let errors: Vec<f64> = jobs
        .par_iter()
        .map(|&(o, pi, t)| {
            let seed = cell_seed(spec.base_seed, pi, t);
            let run = || -> l4dict_core::Result<f64> {
                let params = ModelParams::new(spec.n, spec.p_grid[pi], spec.theta, seed)?;
                let mut rng = seeded_rng(seed);
                let bundle = synthesize_from_rng(&params, &mut rng)?;
                let a0 = gen_haar_orthogonal(spec.n, &mut rng)?;
                let trace = msp_dl(
                    &a0,
                    &bundle.observations,
                    spec.theta,
                    &configs[o],
                    Some(&bundle.dictionary),
                )?;
                Ok(normalized_error(&trace))
            };
            run().unwrap_or_else(|e| {
                log::warn!(
                    "sweep 2k={} p={} trial {t} failed: {e}",
                    spec.orders[o],
                    spec.p_grid[pi]
                );
                1.0
            })
        })
        .collect();
    let cells = errors
        .chunks(spec.trials)
        .zip(jobs.iter().step_by(spec.trials))
        .map(|(chunk, &(o, pi, _))| SweepCell {
            order_2k: spec.orders[o],
            p: spec.p_grid[pi],
            mean_error: chunk.iter().sum::<f64>() / chunk.len() as f64,
        })
        .collect();

    let a0 = gen_haar_orthogonal(spec.n, &mut seeded_rng(spec.base_seed))?;
    let id = OrthogonalMatrix::identity(spec.n);
    let iterations = configs
        .iter()
        .map(|cfg| {
            let trace = msp_orth(&a0, &id, cfg)?;
            Ok((cfg.order_2k, trace.first_reaching(1.0 - spec.det_tol)))
        })
        .collect::<l4dict_core::Result<_>>()?;
    Ok(SweepResult {
        errors: cells,
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgaSpec {
    pub n_grid: Vec<usize>,
    /// Step sizes; `None` is the infinite step.
    pub alphas: Vec<Option<f64>>,
    /// Iterations are counted until `g_norm ≥ 1 − tol`.
    pub tol: f64,
    pub max_iters: usize,
    pub base_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgaRow {
    pub n: usize,
    /// One entry per step size; `None` when `max_iters` ran out first.
    pub iterations: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgaTable {
    pub alphas: Vec<Option<f64>>,
    pub rows: Vec<PgaRow>,
}

impl PgaTable {
    /// Columns `n,alpha,iterations`, with `inf` for the infinite step and
    /// `-1` for runs that hit the iteration cap.
    pub fn csv(&self) -> Result<Vec<u8>, IoError> {
        let mut rows = Vec::new();
        for r in &self.rows {
            for (alpha, it) in self.alphas.iter().zip(&r.iterations) {
                rows.push(vec![
                    r.n.to_string(),
                    alpha.map_or("inf".into(), |a| format!("{a:?}")),
                    it.map_or("-1".into(), |i| i.to_string()),
                ]);
            }
        }
        csv_bytes(&["n", "alpha", "iterations"], rows)
    }
}

/// Iterations of projected gradient ascent to reach `g ≥ 1 − tol`, from one
/// shared Haar start per `n` (seed `base_seed ^ n`) across all step sizes.
pub fn run_pga_table(spec: &PgaSpec) -> l4dict_core::Result<PgaTable> {
    if !(spec.tol > 0.0 && spec.tol < 1.0) {
        return Err(l4dict_core::Error::InvalidParameter(format!(
            "tol = {} must lie in (0, 1)",
            spec.tol
        )));
    }
    let steps: Vec<StepSize> = spec
        .alphas
        .iter()
        .map(|a| a.map_or(StepSize::Infinite, StepSize::Finite))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..spec.n_grid.len())
        .flat_map(|i| (0..steps.len()).map(move |j| (i, j)))
        .collect();
    let counts: Vec<Option<usize>> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let n = spec.n_grid[i];
            let a0 = gen_haar_orthogonal(n, &mut seeded_rng(trial_seed(spec.base_seed, n as u64)))?;
            let cfg = SolveConfig {
                step: steps[j],
                max_iters: spec.max_iters,
                stop_tol: f64::MIN_POSITIVE,
                ..SolveConfig::default()
            };
            first_reaching_pga(&a0, &cfg, 1.0 - spec.tol)
        })
        .collect::<l4dict_core::Result<_>>()?;
    let rows = spec
        .n_grid
        .iter()
        .zip(counts.chunks(steps.len().max(1)))
        .map(|(&n, c)| PgaRow {
            n,
            iterations: c.to_vec(),
        })
        .collect();
    Ok(PgaTable {
        alphas: spec.alphas.clone(),
        rows,
    })
}

fn first_reaching_pga(a0: &OrthogonalMatrix, cfg: &SolveConfig, threshold: f64) -> l4dict_core::Result<Option<usize>> {
    let trace = pga_run(a0, cfg)?;
    Ok(trace.first_reaching(threshold))
}
