//! Command-line front end.
//!
//! Effective settings are built in three layers: built-in defaults, then the
//! JSON file given by `--config`, then explicit flags. The merged settings are
//! echoed into `manifest.json` in the output directory.
//!
//! Exit codes: 0 success, 1 domain or numerical failure, 2 usage error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use l4dict_core::analysis::{concentration_probe, recovery_constant};
use l4dict_core::model::{gen_haar_orthogonal, precondition, seeded_rng, synthesize, synthesize_from_rng};
use l4dict_core::solver::msp_dl;
use l4dict_core::{ModelParams, OrthogonalMatrix, SolveConfig, StepSize};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::experiments::{
    run_2k_sweep, run_convergence, run_pga_table, run_phase_transition, Axis, AxisKind, ConvergenceMode, FixedParams,
    GridSpec, PgaSpec, SolverSettings, SweepSpec,
};
use crate::imaging::{learn_image_dictionary, load_idx_images, pca_basis, reconstruct_topk, Ranking};
use crate::io::{self, csv_bytes, fmt_opt, Manifest};
use crate::verify::run_suite;

pub const DEFAULT_SEED: u64 = 42;
pub const SEED_ENV: &str = "L4DICT_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "l4dict",
    version,
    about = "Orthogonal dictionary learning by l4-norm maximization"
)]
pub struct Cli {
    /// Base seed [default: $L4DICT_SEED, else 42]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every logical core
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory
    #[arg(long, global = true, default_value = "l4dict-out")]
    pub out: PathBuf,
    /// JSON file with settings; explicit flags take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// More log output (repeatable)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic data set Y = D X
    Generate(ModelFlags),
    /// Learn a dictionary from data (loaded or synthesized)
    Solve(SolveFlags),
    /// Run the self-check suite and print a pass/fail table
    Verify,
    /// Per-iteration objective traces over independent trials
    Trace(TraceFlags),
    /// Recovery error over a (theta, p) grid
    PhaseTransition(PhaseFlags),
    /// Error and iteration counts across objective orders 2k
    #[command(name = "sweep-2k")]
    Sweep2k(SweepFlags),
    /// Iterations of projected gradient ascent per step size
    PgaTable(PgaFlags),
    /// Deviation of the l4 objective from its expectation versus p
    ProbeConcentration(ConcentrationFlags),
    /// Learn a dictionary from IDX images and compare against PCA
    ImageDict(ImageFlags),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Solve(_) => "solve",
            Command::Verify => "verify",
            Command::Trace(_) => "trace",
            Command::PhaseTransition(_) => "phase-transition",
            Command::Sweep2k(_) => "sweep-2k",
            Command::PgaTable(_) => "pga-table",
            Command::ProbeConcentration(_) => "probe-concentration",
            Command::ImageDict(_) => "image-dict",
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct ModelFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct SolverFlags {
    /// Even exponent 2k of the objective
    #[arg(long = "order-2k")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order_2k: Option<u32>,
    /// Step size: a positive number or `inf`
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    /// Stop once the step displacement falls below this
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Bias coefficient beta (infinite step only)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bias: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConf {
    pub order_2k: u32,
    pub alpha: String,
    pub max_iters: usize,
    pub tol: f64,
    pub bias: f64,
}

impl Default for SolverConf {
    fn default() -> Self {
        let c = SolveConfig::default();
        Self {
            order_2k: c.order_2k,
            alpha: c.step.to_string(),
            max_iters: c.max_iters,
            tol: c.stop_tol,
            bias: c.bias_beta,
        }
    }
}

impl SolverConf {
    fn to_config(&self) -> Result<SolveConfig, CliError> {
        let step = StepSize::from_str(&self.alpha).map_err(|e| CliError::Usage(e.to_string()))?;
        let cfg = SolveConfig {
            order_2k: self.order_2k,
            step,
            max_iters: self.max_iters,
            stop_tol: self.tol,
            bias_beta: self.bias,
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }

    fn settings(&self) -> Result<SolverSettings, CliError> {
        Ok(self.to_config()?.into())
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveFlags {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelFlags,
    /// Observations Y in the matrix text format; synthesized when absent
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<PathBuf>,
    /// Ground-truth dictionary for the g_norm trace
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    /// Whiten Y before solving
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precondition: Option<bool>,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TraceFlags {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelFlags,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// `orthogonal` (D = I, no data) or `dictionary-learning`
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PhaseFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Comma-separated sparsity levels
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_grid: Option<Vec<f64>>,
    /// Comma-separated sample counts
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_grid: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Larger default grids instead of desk-scale ones
    #[arg(long)]
    #[serde(skip)]
    pub full: bool,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_grid: Option<Vec<usize>>,
    /// Comma-separated even exponents 2k
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orders: Option<Vec<u32>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Iterations are counted until 1 - g_norm falls below this
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub det_tol: Option<f64>,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PgaFlags {
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<usize>>,
    /// Comma-separated step sizes; `inf` for the infinite step
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<String>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConcentrationFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_grid: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ImageFlags {
    /// IDX image file (magic 0x00000803)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub images: Option<PathBuf>,
    /// Largest number of basis vectors to reconstruct with
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topk: Option<usize>,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelConf {
    n: usize,
    p: usize,
    theta: f64,
}

impl Default for ModelConf {
    fn default() -> Self {
        Self {
            n: 10,
            p: 5000,
            theta: 0.3,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolveConf {
    n: usize,
    p: usize,
    theta: f64,
    y: Option<PathBuf>,
    truth: Option<PathBuf>,
    precondition: bool,
    solver: SolverConf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceConf {
    n: usize,
    p: usize,
    theta: f64,
    trials: usize,
    mode: ConvergenceMode,
    solver: SolverConf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhaseConf {
    n: usize,
    theta_grid: Vec<f64>,
    p_grid: Vec<usize>,
    trials: usize,
    solver: SolverConf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepConf {
    n: usize,
    theta: f64,
    p_grid: Vec<usize>,
    orders: Vec<u32>,
    trials: usize,
    det_tol: f64,
    solver: SolverConf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PgaConf {
    n_grid: Vec<usize>,
    alphas: Vec<String>,
    tol: f64,
    max_iters: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConcentrationConf {
    n: usize,
    theta: f64,
    p_grid: Vec<usize>,
    trials: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ImageConf {
    images: Option<PathBuf>,
    topk: usize,
    solver: SolverConf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyConf {}

/// Usage problems map to exit code 2, everything else to 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Domain(e.into())
    }
}

/// Recursively overlays `top` onto `base`.
fn deep_merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn effective<C: Serialize + DeserializeOwned>(
    defaults: C,
    file: &Map<String, Value>,
    flags: &impl Serialize,
) -> Result<(C, Value), CliError> {
    let mut value = serde_json::to_value(defaults).map_err(|e| CliError::Usage(e.to_string()))?;
    deep_merge(&mut value, Value::Object(file.clone()));
    deep_merge(
        &mut value,
        serde_json::to_value(flags).map_err(|e| CliError::Usage(e.to_string()))?,
    );
    let conf = serde_json::from_value(value.clone()).map_err(|e| CliError::Usage(format!("config: {e}")))?;
    Ok((conf, value))
}

struct Ctx {
    seed: u64,
    out: PathBuf,
    manifest: Manifest,
}

impl Ctx {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        io::save_bytes(self.out.join(name), bytes)?;
        self.manifest.files.push(name.into());
        Ok(())
    }

    fn write_matrix(&mut self, name: &str, m: &l4dict_core::Matrix) -> Result<(), CliError> {
        io::save_matrix(self.out.join(name), m)?;
        self.manifest.files.push(name.into());
        Ok(())
    }

    fn finish(self) -> Result<(), CliError> {
        self.manifest.save(&self.out)?;
        Ok(())
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

/// Parses `args` and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.verbose);
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            match &e {
                CliError::Usage(msg) => {
                    eprintln!("error: {msg}\n\nUsage: l4dict [OPTIONS] <COMMAND>; see `l4dict --help`")
                }
                CliError::Domain(err) => eprintln!("error: {err:#}"),
            }
            e.exit_code()
        }
    }
}

fn read_config(path: Option<&Path>) -> Result<Map<String, Value>, CliError> {
    let Some(path) = path else { return Ok(Map::new()) };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(CliError::Usage(format!("{}: expected a JSON object", path.display()))),
        Err(e) => Err(CliError::Usage(format!("{}: {e}", path.display()))),
    }
}

fn resolve_seed(flag: Option<u64>, file: &mut Map<String, Value>) -> Result<u64, CliError> {
    let from_file = match file.remove("seed") {
        None => None,
        Some(v) => Some(
            v.as_u64()
                .ok_or_else(|| CliError::Usage("config: seed must be an unsigned integer".into()))?,
        ),
    };
    if let Some(s) = flag.or(from_file) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|e| CliError::Usage(format!("{SEED_ENV}={s:?}: {e}"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let mut file = read_config(cli.config.as_deref())?;
    let seed = resolve_seed(cli.seed, &mut file)?;
    let jobs = match (cli.jobs, file.remove("jobs")) {
        (Some(j), _) => j,
        (None, Some(v)) => {
            v.as_u64()
                .ok_or_else(|| CliError::Usage("config: jobs must be an unsigned integer".into()))? as usize
        }
        (None, None) => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("building worker pool")?;
    io::create_dir(&cli.out)?;
    let name = cli.command.name();
    let mut ctx = Ctx {
        seed,
        out: cli.out.clone(),
        manifest: Manifest::new(name, seed, Value::Null),
    };
    pool.install(|| dispatch(cli.command, &file, &mut ctx))?;
    ctx.finish()
}

fn dispatch(command: Command, file: &Map<String, Value>, ctx: &mut Ctx) -> Result<(), CliError> {
    match command {
        Command::Generate(f) => {
            let (c, v) = effective(ModelConf::default(), file, &f)?;
            ctx.manifest.config = v;
            cmd_generate(c, ctx)
        }
        Command::Solve(f) => {
            let m = ModelConf::default();
            let defaults = SolveConf {
                n: m.n,
                p: m.p,
                theta: m.theta,
                ..SolveConf::default()
            };
            let (c, v) = effective(defaults, file, &f)?;
            ctx.manifest.config = v;
            cmd_solve(c, ctx)
        }
        Command::Verify => {
            let (_, v) = effective(VerifyConf {}, file, &VerifyConf {})?;
            ctx.manifest.config = v;
            cmd_verify(ctx)
        }
        Command::Trace(f) => {
            let defaults = TraceConf {
                n: 50,
                p: 20_000,
                theta: 0.3,
                trials: 10,
                mode: ConvergenceMode::DictionaryLearning,
                solver: SolverConf {
                    max_iters: 30,
                    ..SolverConf::default()
                },
            };
            let (c, v) = effective(defaults, file, &f)?;
            ctx.manifest.config = v;
            cmd_trace(c, ctx)
        }
        Command::PhaseTransition(f) => {
            let defaults = if f.full {
                PhaseConf {
                    n: 50,
                    theta_grid: (1..20).map(|i| i as f64 * 0.05).collect(),
                    p_grid: (1..=20).map(|i| i * 500).collect(),
                    trials: 10,
                    solver: SolverConf::default(),
                }
            } else {
                PhaseConf {
                    n: 20,
                    theta_grid: (1..10).map(|i| i as f64 / 10.0).collect(),
                    p_grid: vec![500, 2000, 20_000],
                    trials: 10,
                    solver: SolverConf {
                        max_iters: 100,
                        ..SolverConf::default()
                    },
                }
            };
            let (c, v) = effective(defaults, file, &f)?;
            ctx.manifest.config = v;
            cmd_phase(c, ctx)
        }
        Command::Sweep2k(f) => {
            let defaults = SweepConf {
                n: 10,
                theta: 0.3,
                p_grid: vec![200, 1000, 5000, 20_000],
                orders: vec![4, 6, 8, 10],
                trials: 10,
                det_tol: 1e-6,
                solver: SolverConf {
                    max_iters: 100,
                    ..SolverConf::default()
                },
            };
            let (c, v) = effective(defaults, file, &f)?;
            ctx.manifest.config = v;
            cmd_sweep(c, ctx)
        }
        Command::PgaTable(f) => {
            let defaults = PgaConf {
                n_grid: vec![5, 25, 50, 100],
                alphas: ["1", "10", "100", "inf"].map(String::from).to_vec(),
                tol: 1e-6,
                max_iters: 500,
            };
            let (c, v) = effective(defaults, file, &f)?;
            ctx.manifest.config = v;
            cmd_pga(c, ctx)
        }
        Command::ProbeConcentration(f) => {
            let defaults = ConcentrationConf {
                n: 10,
                theta: 0.3,
                p_grid: vec![1000, 3000, 10_000, 30_000, 100_000],
                trials: 20,
            };
            let (c, v) = effective(defaults, file, &f)?;
            ctx.manifest.config = v;
            cmd_concentration(c, ctx)
        }
        Command::ImageDict(f) => {
            let defaults = ImageConf {
                images: None,
                topk: 10,
                solver: SolverConf {
                    max_iters: 50,
                    ..SolverConf::default()
                },
            };
            let (c, v) = effective(defaults, file, &f)?;
            ctx.manifest.config = v;
            cmd_image(c, ctx)
        }
    }
}

fn model_params(n: usize, p: usize, theta: f64, seed: u64) -> Result<ModelParams, CliError> {
    ModelParams::new(n, p, theta, seed).map_err(|e| CliError::Usage(e.to_string()))
}

#[derive(Serialize)]
struct ParamsSidecar {
    n: usize,
    p: usize,
    theta: f64,
    seed: u64,
}

fn cmd_generate(c: ModelConf, ctx: &mut Ctx) -> Result<(), CliError> {
    let params = model_params(c.n, c.p, c.theta, ctx.seed)?;
    let bundle = synthesize(&params)?;
    ctx.write_matrix("D.txt", &bundle.dictionary)?;
    ctx.write_matrix("X.txt", &bundle.codes)?;
    ctx.write_matrix("Y.txt", &bundle.observations)?;
    let sidecar = ParamsSidecar {
        n: params.n,
        p: params.p,
        theta: params.theta,
        seed: params.seed,
    };
    io::save_json(ctx.out.join("params.json"), &sidecar)?;
    ctx.manifest.files.push("params.json".into());
    println!("wrote D, X, Y ({} x {}) to {}", params.n, params.p, ctx.out.display());
    Ok(())
}

fn cmd_solve(c: SolveConf, ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = c.solver.to_config()?;
    let mut rng = seeded_rng(ctx.seed);
    let (y, truth) = match &c.y {
        Some(path) => {
            let y = io::load_matrix(path).with_context(|| format!("reading {}", path.display()))?;
            let truth = match &c.truth {
                Some(t) => {
                    let d = io::load_matrix(t).with_context(|| format!("reading {}", t.display()))?;
                    Some(OrthogonalMatrix::with_tol(d, 1e-6)?)
                }
                None => None,
            };
            (y, truth)
        }
        None => {
            let params = model_params(c.n, c.p, c.theta, ctx.seed)?;
            let bundle = synthesize_from_rng(&params, &mut rng)?;
            (bundle.observations, Some(bundle.dictionary))
        }
    };
    let y = if c.precondition { precondition(&y, c.theta)? } else { y };
    let a0 = gen_haar_orthogonal(y.rows(), &mut rng)?;
    let trace = msp_dl(&a0, &y, c.theta, &cfg, truth.as_ref())?;
    ctx.write_matrix("A.txt", &trace.final_iterate)?;
    let rows = (0..=trace.iters_used).map(|t| {
        vec![
            t.to_string(),
            fmt_opt(trace.g_norm.get(t).copied()),
            fmt_opt(trace.fhat_norm.get(t).copied()),
            fmt_opt(t.checked_sub(1).map(|s| trace.displacement[s])),
        ]
    });
    ctx.write(
        "trace.csv",
        &csv_bytes(&["iter", "g_norm", "fhat_norm", "displacement"], rows)?,
    )?;
    match trace.final_g() {
        Some(g) => println!(
            "iterations {}  converged {}  g_norm {g:.8}",
            trace.iters_used, trace.converged
        ),
        None => println!("iterations {}  converged {}", trace.iters_used, trace.converged),
    }
    Ok(())
}

fn cmd_verify(ctx: &mut Ctx) -> Result<(), CliError> {
    let checks = run_suite(ctx.seed);
    for c in &checks {
        println!("{c}");
    }
    let rows = checks
        .iter()
        .map(|c| vec![c.name.to_string(), c.passed.to_string(), c.detail.clone()]);
    ctx.write("verify.csv", &csv_bytes(&["check", "passed", "detail"], rows)?)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} of {} checks passed", checks.len() - failed, checks.len());
    if failed > 0 {
        return Err(CliError::Domain(anyhow::anyhow!("{failed} checks failed")));
    }
    Ok(())
}

fn cmd_trace(c: TraceConf, ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = c.solver.to_config()?;
    let n_for_orth = if c.mode == ConvergenceMode::Orthogonal {
        c.n.max(2)
    } else {
        c.n
    };
    let params = model_params(n_for_orth, c.p.max(n_for_orth), c.theta, ctx.seed)?;
    let run = run_convergence(&params, &cfg, c.trials, c.mode)?;
    ctx.write("trace.csv", &run.csv()?)?;
    for (t, e) in run.failures() {
        ctx.manifest.notes.push(format!("trial {t} failed: {e}"));
    }
    let finals: Vec<f64> = run.final_g().into_iter().flatten().collect();
    let min = finals.iter().copied().fold(f64::INFINITY, f64::min);
    println!(
        "{} trials, {} failed, min final g_norm {min:.8}",
        c.trials,
        c.trials - finals.len()
    );
    Ok(())
}

fn cmd_phase(c: PhaseConf, ctx: &mut Ctx) -> Result<(), CliError> {
    let spec = GridSpec {
        axis1: Axis::new(AxisKind::Theta, c.theta_grid.clone()),
        axis2: Axis::new(AxisKind::P, c.p_grid.iter().map(|&p| p as f64).collect()),
        fixed: FixedParams {
            n: c.n,
            p: c.n,
            theta: 0.5,
        },
        trials: c.trials,
        cfg: c.solver.settings()?,
        base_seed: ctx.seed,
    };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let result = run_phase_transition(&spec)?;
    ctx.write("phase.csv", &result.csv()?)?;
    let overlay = c
        .theta_grid
        .iter()
        .map(|&t| vec![format!("{t:?}"), format!("{:?}", recovery_constant(t))]);
    ctx.write("recovery_constant.csv", &csv_bytes(&["theta", "constant"], overlay)?)?;
    io::save_json(ctx.out.join("grid.json"), &spec)?;
    ctx.manifest.files.push("grid.json".into());
    let violations: usize = result.cells.iter().map(|c| c.bound_violations).sum();
    if violations > 0 {
        ctx.manifest
            .notes
            .push(format!("{violations} successful trials violated the distance bound"));
    }
    println!("{} cells in {:.1} s", result.cells.len(), result.wall_time_s);
    Ok(())
}

fn cmd_sweep(c: SweepConf, ctx: &mut Ctx) -> Result<(), CliError> {
    let spec = SweepSpec {
        n: c.n,
        theta: c.theta,
        p_grid: c.p_grid,
        orders: c.orders,
        trials: c.trials,
        cfg: c.solver.settings()?,
        det_tol: c.det_tol,
        base_seed: ctx.seed,
    };
    let result = run_2k_sweep(&spec)?;
    ctx.write("sweep_errors.csv", &result.errors_csv()?)?;
    ctx.write("sweep_iterations.csv", &result.iterations_csv()?)?;
    println!("{} cells", result.errors.len());
    Ok(())
}

fn cmd_pga(c: PgaConf, ctx: &mut Ctx) -> Result<(), CliError> {
    let alphas = c
        .alphas
        .iter()
        .map(|a| match StepSize::from_str(a) {
            Ok(StepSize::Infinite) => Ok(None),
            Ok(StepSize::Finite(x)) => Ok(Some(x)),
            Err(e) => Err(CliError::Usage(e.to_string())),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let spec = PgaSpec {
        n_grid: c.n_grid,
        alphas,
        tol: c.tol,
        max_iters: c.max_iters,
        base_seed: ctx.seed,
    };
    let table = run_pga_table(&spec)?;
    ctx.write("pga_table.csv", &table.csv()?)?;
    for row in &table.rows {
        let cells: Vec<String> = row
            .iterations
            .iter()
            .map(|i| i.map_or("-".into(), |v| v.to_string()))
            .collect();
        println!("n = {:<4} {}", row.n, cells.join("  "));
    }
    Ok(())
}

fn cmd_concentration(c: ConcentrationConf, ctx: &mut Ctx) -> Result<(), CliError> {
    let mut rng = seeded_rng(ctx.seed);
    let rows = concentration_probe(c.n, c.theta, &c.p_grid, c.trials, &mut rng)?;
    let table = rows.iter().map(|r| {
        vec![
            r.p.to_string(),
            format!("{:?}", r.mean_deviation),
            format!("{:?}", r.max_deviation),
            format!("{:?}", r.scaling),
        ]
    });
    ctx.write(
        "concentration.csv",
        &csv_bytes(&["p", "mean_deviation", "max_deviation", "scaling"], table)?,
    )?;
    Ok(())
}

fn cmd_image(c: ImageConf, ctx: &mut Ctx) -> Result<(), CliError> {
    let path = c
        .images
        .as_ref()
        .ok_or_else(|| CliError::Usage("image-dict needs --images <path>".into()))?;
    let cfg = c.solver.to_config()?;
    let images = load_idx_images(path)?;
    let learned = learn_image_dictionary(&images, &cfg, ctx.seed, None)?;
    let dictionary = learned.dictionary();
    let topk = c.topk.min(images.dim());
    let pca = pca_basis(&images, topk)?;
    let mut rows = Vec::new();
    for k in 1..=topk {
        let msp = reconstruct_topk(&images, &dictionary, Ranking::Energy, k)?;
        let base = reconstruct_topk(&images, &pca, Ranking::Given, k)?;
        rows.push(vec![k.to_string(), format!("{:?}", msp.mse), format!("{:?}", base.mse)]);
    }
    ctx.write(
        "reconstruction_mse.csv",
        &csv_bytes(&["k", "msp_mse", "pca_mse"], rows)?,
    )?;
    ctx.write_matrix("dictionary.txt", &dictionary)?;
    ctx.write_matrix("pca_basis.txt", &pca)?;
    println!(
        "{} images of {} x {}, {} iterations",
        images.count(),
        images.height(),
        images.width(),
        learned.trace.iters_used
    );
    Ok(())
}
