//! Image dictionaries: IDX ingestion, MSP on raw pixel vectors, a PCA
//! baseline and top-k reconstructions.
//!
//! Images are stored as the columns of an `n × count` matrix with
//! `n = height · width` (row-major pixels).

use std::path::Path;

use l4dict_core::linalg::svd;
use l4dict_core::model::{gen_haar_orthogonal, seeded_rng};
use l4dict_core::solver::msp_dl;
use l4dict_core::{Matrix, OrthogonalMatrix, SolveConfig, SolveTrace};

/// Magic number of an IDX file holding unsigned bytes in three dimensions.
pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;

#[derive(Debug, thiserror::Error)]
pub enum ImagingError {
    #[error("bad IDX magic {0:#010x}, expected {IDX_IMAGES_MAGIC:#010x}")]
    BadMagic(u32),
    #[error("IDX file truncated: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: usize, found: usize },
    #[error("IDX dimensions {count} x {height} x {width} are empty or too large")]
    DimensionOverflow { count: u32, height: u32, width: u32 },
    #[error("pixel {value} at ({pixel}, {image}) is outside [0, 1]")]
    PixelRange { pixel: usize, image: usize, value: f64 },
    #[error("image data has zero variance")]
    ZeroVariance,
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] l4dict_core::Error),
    #[error("{path}: {source}")]
    File {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = ImagingError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub struct ImageSet {
    height: usize,
    width: usize,
    /// `n × count`, one image per column.
    pixels: Matrix,
}

impl ImageSet {
    /// Wraps a pixel matrix whose columns are vectorized `height × width`
    /// images. Entries need only be finite; decoded IDX data lies in `[0, 1]`.
    pub fn from_matrix(height: usize, width: usize, pixels: Matrix) -> Result<Self> {
        if height.checked_mul(width) != Some(pixels.rows()) {
            return Err(ImagingError::Invalid(format!(
                "{height} x {width} images need {} rows, matrix has {}",
                height.saturating_mul(width),
                pixels.rows()
            )));
        }
        Ok(Self { height, width, pixels })
    }

    pub fn count(&self) -> usize {
        self.pixels.cols()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Pixels per image.
    pub fn dim(&self) -> usize {
        self.pixels.rows()
    }

    pub fn pixels(&self) -> &Matrix {
        &self.pixels
    }

    pub fn into_matrix(self) -> Matrix {
        self.pixels
    }
}

/// Decodes an IDX image file; bytes are scaled by `1/255`.
pub fn parse_idx(bytes: &[u8]) -> Result<ImageSet> {
    let word = |i: usize| -> Result<u32> {
        bytes
            .get(4 * i..4 * i + 4)
            .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or(ImagingError::TruncatedFile {
                expected: 16,
                found: bytes.len(),
            })
    };
    let magic = word(0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(ImagingError::BadMagic(magic));
    }
    let (count, height, width) = (word(1)?, word(2)?, word(3)?);
    let overflow = ImagingError::DimensionOverflow { count, height, width };
    let n = (height as usize).checked_mul(width as usize);
    let total = n.and_then(|n| n.checked_mul(count as usize));
    let (n, total) = match (n, total) {
        (Some(n), Some(t)) if t > 0 && t.checked_add(16).is_some() => (n, t),
        _ => return Err(overflow),
    };
    let body = &bytes[16..];
    if body.len() < total {
        return Err(ImagingError::TruncatedFile {
            expected: 16 + total,
            found: bytes.len(),
        });
    }
    let count = count as usize;
    let pixels = Matrix::from_fn(n, count, |px, img| f64::from(body[img * n + px]) / 255.0);
    ImageSet::from_matrix(height as usize, width as usize, pixels)
}

/// Encodes an image set as IDX, rounding `255 · pixel` to the nearest byte.
pub fn encode_idx(images: &ImageSet) -> Result<Vec<u8>> {
    let dims = [images.count(), images.height, images.width].map(|d| u32::try_from(d).ok());
    let [Some(count), Some(height), Some(width)] = dims else {
        return Err(ImagingError::Invalid("image set too large for IDX".into()));
    };
    let n = images.dim();
    let mut out = Vec::with_capacity(16 + n * images.count());
    for w in [IDX_IMAGES_MAGIC, count, height, width] {
        out.extend_from_slice(&w.to_be_bytes());
    }
    for img in 0..images.count() {
        for px in 0..n {
            let value = images.pixels[(px, img)];
            if !(0.0..=1.0).contains(&value) {
                return Err(ImagingError::PixelRange {
                    pixel: px,
                    image: img,
                    value,
                });
            }
            out.push((value * 255.0).round() as u8);
        }
    }
    Ok(out)
}

pub fn load_idx_images(path: impl AsRef<Path>) -> Result<ImageSet> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| ImagingError::File {
        path: path.to_path_buf(),
        source,
    })?;
    parse_idx(&bytes)
}

#[derive(Debug, Clone)]
pub struct LearnedDictionary {
    /// Rows are the learned analysis directions; the dictionary is its transpose.
    pub analysis: OrthogonalMatrix,
    pub trace: SolveTrace,
}

impl LearnedDictionary {
    /// Dictionary atoms as columns.
    pub fn dictionary(&self) -> Matrix {
        self.analysis.transpose().into_matrix()
    }
}

/// MSP on the raw `n × count` pixel matrix (no centering, no whitening) from
/// a Haar start drawn with `seed`. `truth`, when known, fills `g_norm`.
pub fn learn_image_dictionary(
    images: &ImageSet,
    cfg: &SolveConfig,
    seed: u64,
    truth: Option<&OrthogonalMatrix>,
) -> Result<LearnedDictionary> {
    let (n, p) = images.pixels.shape();
    if p < n {
        return Err(ImagingError::Invalid(format!("need at least {n} images, got {p}")));
    }
    let a0 = gen_haar_orthogonal(n, &mut seeded_rng(seed))?;
    // θ only scales the `fhat_norm` trace; image data has no known sparsity.
    let trace = msp_dl(&a0, &images.pixels, 1.0, cfg, truth)?;
    Ok(LearnedDictionary {
        analysis: trace.final_iterate.clone(),
        trace,
    })
}

/// Per-pixel means over the image set.
fn pixel_means(images: &ImageSet) -> Vec<f64> {
    let m = &images.pixels;
    (0..m.rows())
        .map(|i| m.row(i).iter().sum::<f64>() / m.cols() as f64)
        .collect()
}

/// Top-`k` principal directions (`n × k`, orthonormal columns) of the
/// mean-centered data, in order of decreasing variance.
pub fn pca_basis(images: &ImageSet, k: usize) -> Result<Matrix> {
    let n = images.dim();
    if k == 0 || k > n {
        return Err(ImagingError::Invalid(format!("k = {k} must lie in 1..={n}")));
    }
    let means = pixel_means(images);
    let centered = Matrix::from_fn(n, images.count(), |i, j| images.pixels[(i, j)] - means[i]);
    let cov = centered.matmul_transpose(&centered)?;
    if cov.trace().partial_cmp(&f64::MIN_POSITIVE) != Some(std::cmp::Ordering::Greater) {
        return Err(ImagingError::ZeroVariance);
    }
    let s = svd(&cov)?;
    Ok(Matrix::from_fn(n, k, |i, j| s.u[(i, j)]))
}

/// How basis columns are ordered before the top `k` are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ranking {
    /// By mean squared coefficient `Σⱼ (bᵢᵀ yⱼ)² / count`, largest first.
    Energy,
    /// Columns are already ordered.
    Given,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// Basis columns used, in rank order.
    pub selected: Vec<usize>,
    pub images: Matrix,
    /// `‖x − x̂‖² / n` per image.
    pub per_image_mse: Vec<f64>,
    pub mse: f64,
}

/// Mean squared coefficient of every basis column over the data set.
pub fn coefficient_energy(images: &ImageSet, basis: &Matrix) -> Result<Vec<f64>> {
    let coeffs = basis.transpose().matmul(&images.pixels)?;
    let p = images.count() as f64;
    Ok((0..coeffs.rows())
        .map(|i| coeffs.row(i).iter().map(|c| c * c).sum::<f64>() / p)
        .collect())
}

/// Projects every image onto the span of the top-`k` basis columns,
/// `x̂ = B_k B_kᵀ x`. The basis columns must be orthonormal.
pub fn reconstruct_topk(images: &ImageSet, basis: &Matrix, ranking: Ranking, k: usize) -> Result<Reconstruction> {
    let n = images.dim();
    if basis.rows() != n {
        return Err(ImagingError::Invalid(format!(
            "basis has {} rows, images have {n} pixels",
            basis.rows()
        )));
    }
    if k == 0 || k > basis.cols() {
        return Err(ImagingError::Invalid(format!(
            "k = {k} must lie in 1..={}",
            basis.cols()
        )));
    }
    let mut order: Vec<usize> = (0..basis.cols()).collect();
    if ranking == Ranking::Energy {
        let energy = coefficient_energy(images, basis)?;
        order.sort_by(|&a, &b| energy[b].total_cmp(&energy[a]));
    }
    order.truncate(k);
    let bk = Matrix::from_fn(n, k, |i, j| basis[(i, order[j])]);
    let coeffs = bk.transpose().matmul(&images.pixels)?;
    let recon = bk.matmul(&coeffs)?;
    let per_image_mse: Vec<f64> = (0..images.count())
        .map(|j| {
            (0..n)
                .map(|i| (images.pixels[(i, j)] - recon[(i, j)]).powi(2))
                .sum::<f64>()
                / n as f64
        })
        .collect();
    let mse = per_image_mse.iter().sum::<f64>() / per_image_mse.len() as f64;
    Ok(Reconstruction {
        selected: order,
        images: recon,
        per_image_mse,
        mse,
    })
}
