//! Bernoulli-Gaussian sparse data `Y = D_o · X_o` with an orthogonal
//! dictionary, plus whitening for non-orthogonal complete dictionaries.
//!
//! # Random streams
//!
//! All generators draw from [`ModelRng`] (ChaCha8, seeded through
//! `SeedableRng::seed_from_u64`). The stream order is part of the contract:
//!
//! - [`gen_bernoulli_gaussian`] visits entries row-major and draws, for every
//!   entry, one Bernoulli(θ) gate followed by one standard normal, whether or
//!   not the gate is open.
//! - [`gen_haar_orthogonal`] draws an `n × n` standard normal matrix row-major.
//! - [`synthesize`] draws the dictionary first, then the codes.
//!
//! Per-trial streams come from [`trial_seed`]: `base ^ index`.

use alloc::format;
use alloc::vec::Vec;

use rand::distr::{Bernoulli, Distribution};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use crate::linalg::{qr, svd_wide, Matrix, OrthogonalMatrix, RANK_TOL};
use crate::{Error, Result};

/// The pinned generator.
pub type ModelRng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> ModelRng {
    ModelRng::seed_from_u64(seed)
}

/// Seed of trial `index` derived from an experiment's base seed.
#[inline]
pub fn trial_seed(base: u64, index: u64) -> u64 {
    base ^ index
}

/// Parameters of the generative model `Y = D_o X_o`, `X_o ~ BG(θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub n: usize,
    pub p: usize,
    pub theta: f64,
    pub seed: u64,
}

impl ModelParams {
    pub fn new(n: usize, p: usize, theta: f64, seed: u64) -> Result<Self> {
        let params = Self { n, p, theta, seed };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!("n = {} must be at least 2", self.n)));
        }
        if self.p < self.n {
            return Err(Error::InvalidParameter(format!(
                "p = {} must be at least n = {}",
                self.p, self.n
            )));
        }
        check_theta(self.theta)
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("theta = {theta} must lie in (0, 1)")))
    }
}

/// A synthetic dataset; `observations = dictionary · codes`.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub dictionary: OrthogonalMatrix,
    pub codes: Matrix,
    pub observations: Matrix,
    pub params: ModelParams,
}

/// `n × p` matrix of i.i.d. Bernoulli(θ)·N(0, 1) entries.
pub fn gen_bernoulli_gaussian<R: Rng + ?Sized>(n: usize, p: usize, theta: f64, rng: &mut R) -> Result<Matrix> {
    check_theta(theta)?;
    if n == 0 || p == 0 {
        return Err(Error::EmptyMatrix(n, p));
    }
    let gate = Bernoulli::new(theta).map_err(|e| Error::InvalidParameter(format!("{e}")))?;
    let mut data = Vec::with_capacity(n * p);
    for _ in 0..n * p {
        let on = gate.sample(rng);
        let v: f64 = StandardNormal.sample(rng);
        data.push(if on { v } else { 0.0 });
    }
    Matrix::new(n, p, data)
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs
/// of `diag(R)` absorbed into `Q`.
pub fn gen_haar_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<OrthogonalMatrix> {
    if n == 0 {
        return Err(Error::EmptyMatrix(0, 0));
    }
    let g = Matrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let (mut q, r) = qr(&g)?;
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    OrthogonalMatrix::new(q)
}

/// Draws `D_o`, then `X_o`, from the stream seeded by `params.seed`.
pub fn synthesize(params: &ModelParams) -> Result<DatasetBundle> {
    let mut rng = seeded_rng(params.seed);
    synthesize_from_rng(params, &mut rng)
}

/// Like [`synthesize`] but continues an existing stream, so callers can draw
/// further quantities (e.g. an initial iterate) after the data.
pub fn synthesize_from_rng<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> Result<DatasetBundle> {
    params.validate()?;
    let dictionary = gen_haar_orthogonal(params.n, rng)?;
    let codes = gen_bernoulli_gaussian(params.n, params.p, params.theta, rng)?;
    let observations = dictionary.matmul(&codes)?;
    Ok(DatasetBundle {
        dictionary,
        codes,
        observations,
        params: *params,
    })
}

/// Same stream as [`synthesize`] (the Haar draw is consumed and discarded) but
/// with the dictionary replaced by `dictionary`.
pub fn synthesize_with_dictionary(params: &ModelParams, dictionary: OrthogonalMatrix) -> Result<DatasetBundle> {
    if dictionary.dim() != params.n {
        return Err(Error::DimensionMismatch {
            op: "synthesize_with_dictionary",
            lhs: dictionary.shape(),
            rhs: (params.n, params.n),
        });
    }
    let mut bundle = synthesize(params)?;
    bundle.observations = dictionary.matmul(&bundle.codes)?;
    bundle.dictionary = dictionary;
    Ok(bundle)
}

/// Whitening `Ȳ = ((1/pθ)·YYᵀ)^{−1/2} · Y`.
///
/// With `Y = U Σ Ṽᵀ` this is `√(pθ) · U Ṽᵀ`, so `(1/pθ)·ȲȲᵀ = I` up to
/// rounding.
pub fn precondition(y: &Matrix, theta: f64) -> Result<Matrix> {
    check_theta(theta)?;
    let (n, p) = y.shape();
    if p < n {
        return Err(Error::RankDeficient {
            sigma_min: 0.0,
            sigma_max: 0.0,
        });
    }
    let (u, sigma, vt) = svd_wide(y)?;
    let smax = sigma[0];
    let smin = sigma[n - 1];
    if !(smin > RANK_TOL * smax) {
        return Err(Error::RankDeficient {
            sigma_min: smin,
            sigma_max: smax,
        });
    }
    let scale = ((p as f64) * theta).sqrt();
    Ok(u.matmul(&vt)?.scale(scale))
}
