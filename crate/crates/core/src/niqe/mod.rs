//! Natural Image Quality Evaluator.
//!
//! Images are described by natural-scene statistics of their mean-subtracted
//! contrast-normalized (MSCN) coefficients at two scales. A pristine model is a
//! multivariate Gaussian fitted to those features over a corpus of natural
//! images; an image's score is the distance between the model and a Gaussian
//! fitted to the image's own patches. Lower is better.

mod aggd;
pub mod linalg;
mod model;

pub use aggd::{fit_aggd, AggdParams, MIN_SAMPLES};
pub use model::{
    corpus_fingerprint, fit_mvg, fit_pristine_model, mvg_distance, niqe_score, MvgModel, MODEL_FORMAT,
    MODEL_VERSION,
};

use crate::filter::{filter_same, gaussian_kernel};
use crate::image::{downsample_plane, ImageError, Plane};
use crate::Scalar;

pub const FEATURE_DIM: usize = 36;
pub const FEATURES_PER_SCALE: usize = 18;
pub const DEFAULT_PATCH: usize = 96;
pub const DEFAULT_SHARPNESS_FRAC: f64 = 0.75;
const MSCN_WINDOW: usize = 7;
const MSCN_SIGMA: f64 = 7.0 / 6.0;

/// Pairwise-product neighbour offsets `(dy, dx)`: horizontal, vertical, main
/// diagonal, off-diagonal.
const PAIR_SHIFTS: [(isize, isize); 4] = [(0, 1), (1, 0), (1, 1), (-1, 1)];

#[derive(Debug, thiserror::Error)]
pub enum NiqeError {
    #[error("AGGD fit needs at least {MIN_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error("AGGD fit needs samples on both sides of zero")]
    DegenerateSamples,
    #[error("non-finite sample")]
    NonFinite,
    #[error("{width}x{height} image is smaller than {min}x{min}")]
    TooSmall {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error("patch size must be even and at least 20, got {0}")]
    InvalidPatchSize(usize),
    #[error("no patch passed sharpness selection")]
    NoSharpPatches,
    #[error("pristine model needs at least {needed} patches, corpus yielded {got}")]
    InsufficientPatches { needed: usize, got: usize },
    #[error("feature dimension mismatch: model {model}, features {features}")]
    DimensionMismatch { model: usize, features: usize },
    #[error("invalid model file: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Local statistics of a plane: MSCN coefficients and the local deviation field.
#[derive(Clone, Debug)]
pub struct Mscn<T> {
    pub coefficients: Plane<T>,
    pub local_sigma: Plane<T>,
}

/// `(y − μ) / (σ + 1)` with μ, σ from a 7×7 Gaussian window (σ_g = 7/6) and
/// symmetric edge extension.
pub fn compute_mscn<T: Scalar>(y: &Plane<T>) -> Result<Mscn<T>, NiqeError> {
    if y.width() < MSCN_WINDOW || y.height() < MSCN_WINDOW {
        return Err(NiqeError::TooSmall {
            width: y.width(),
            height: y.height(),
            min: MSCN_WINDOW,
        });
    }
    let kernel = gaussian_kernel::<T>(MSCN_WINDOW, MSCN_SIGMA);
    let mu = filter_same(y, &kernel);
    let sq = filter_same(&y.map(|v| v * v), &kernel);
    let sigma = sq.zip_map(&mu, |s, m| (s - m * m).abs().sqrt());
    let centered = y.zip_map(&mu, |v, m| v - m);
    let coefficients = centered.zip_map(&sigma, |c, s| c / (s + T::one()));
    Ok(Mscn {
        coefficients,
        local_sigma: sigma,
    })
}

/// Per-patch feature rows plus the top-left pixel of each patch at scale 1.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix<T> {
    pub rows: Vec<[T; FEATURE_DIM]>,
    pub patch_coords: Vec<(usize, usize)>,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Patch selection parameters.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PatchParams {
    pub patch: usize,
    /// Patches whose mean local deviation is below this fraction of the
    /// sharpest patch's are dropped. Zero keeps every patch.
    pub sharpness_frac: f64,
}

impl Default for PatchParams {
    fn default() -> Self {
        Self {
            patch: DEFAULT_PATCH,
            sharpness_frac: DEFAULT_SHARPNESS_FRAC,
        }
    }
}

impl PatchParams {
    pub fn scoring(patch: usize) -> Self {
        Self {
            patch,
            sharpness_frac: 0.0,
        }
    }
}

fn block_features<T: Scalar>(block: &Plane<T>, out: &mut [T]) -> Result<(), NiqeError> {
    let p = fit_aggd(block.as_slice())?;
    out[0] = p.shape;
    out[1] = (p.left_sigma * p.left_sigma + p.right_sigma * p.right_sigma) / T::lit(2.0);
    let (w, h) = (block.width(), block.height());
    let mut products = vec![T::zero(); w * h];
    for (k, &(dy, dx)) in PAIR_SHIFTS.iter().enumerate() {
        for y in 0..h {
            let sy = (y as isize - dy).rem_euclid(h as isize) as usize;
            for x in 0..w {
                let sx = (x as isize - dx).rem_euclid(w as isize) as usize;
                products[y * w + x] = block.get(x, y) * block.get(sx, sy);
            }
        }
        let q = fit_aggd(&products)?;
        let base = 2 + 4 * k;
        out[base] = q.shape;
        out[base + 1] = q.mean_offset;
        out[base + 2] = q.left_sigma * q.left_sigma;
        out[base + 3] = q.right_sigma * q.right_sigma;
    }
    Ok(())
}

/// Tiles the image into `patch × patch` blocks (scale 1) and the matching
/// half-size blocks of the 2× downsampled image (scale 2), and computes 18
/// features per scale per block. Trailing rows/columns that do not fill a
/// whole patch are ignored. Blocks whose statistics cannot be fitted are skipped.
pub fn extract_features<T: Scalar>(
    y: &Plane<T>,
    params: PatchParams,
) -> Result<FeatureMatrix<T>, NiqeError> {
    let patch = params.patch;
    if patch < 20 || !patch.is_multiple_of(2) {
        return Err(NiqeError::InvalidPatchSize(patch));
    }
    let (bx, by) = (y.width() / patch, y.height() / patch);
    if bx == 0 || by == 0 {
        return Err(NiqeError::TooSmall {
            width: y.width(),
            height: y.height(),
            min: patch,
        });
    }
    let cropped = y.sub_plane(0, 0, bx * patch, by * patch);
    let fine = compute_mscn(&cropped)?;
    let coarse = compute_mscn(&downsample_plane(&cropped, 2)?)?;

    let sharpness: Vec<T> = (0..by)
        .flat_map(|j| (0..bx).map(move |i| (i, j)))
        .map(|(i, j)| {
            fine.local_sigma
                .sub_plane(i * patch, j * patch, patch, patch)
                .mean()
        })
        .collect();
    let max_sharp = sharpness.iter().fold(T::zero(), |m, &s| m.max(s));
    if max_sharp <= T::zero() {
        return Err(NiqeError::NoSharpPatches);
    }
    let threshold = T::lit(params.sharpness_frac) * max_sharp;

    let half = patch / 2;
    let mut rows = Vec::new();
    let mut patch_coords = Vec::new();
    for j in 0..by {
        for i in 0..bx {
            if sharpness[j * bx + i] < threshold {
                continue;
            }
            let mut row = [T::zero(); FEATURE_DIM];
            let b1 = fine.coefficients.sub_plane(i * patch, j * patch, patch, patch);
            let b2 = coarse.coefficients.sub_plane(i * half, j * half, half, half);
            let fitted = block_features(&b1, &mut row[..FEATURES_PER_SCALE])
                .and_then(|_| block_features(&b2, &mut row[FEATURES_PER_SCALE..]));
            match fitted {
                Ok(()) => {
                    rows.push(row);
                    patch_coords.push((i * patch, j * patch));
                }
                Err(NiqeError::DegenerateSamples) | Err(NiqeError::NonFinite) => continue,
                Err(e) => return Err(e),
            }
        }
    }
    if rows.is_empty() {
        return Err(NiqeError::NoSharpPatches);
    }
    Ok(FeatureMatrix { rows, patch_coords })
}
