use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::linalg::symmetric_eigen;
use super::{extract_features, FeatureMatrix, NiqeError, PatchParams, FEATURE_DIM};
use crate::image::Plane;
use crate::Scalar;

pub const MODEL_FORMAT: &str = "pdbench-niqe-mvg";
pub const MODEL_VERSION: u32 = 1;

/// Multivariate Gaussian over NSS feature vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MvgModel<T> {
    pub format: String,
    pub version: u32,
    pub feature_dim: usize,
    pub patch: PatchParams,
    pub patch_count: usize,
    pub corpus_fingerprint: String,
    pub mean: Vec<T>,
    /// Row-major `feature_dim × feature_dim`.
    pub covariance: Vec<T>,
}

/// Mean and unbiased sample covariance of the rows, accumulated in row order.
/// A single row yields a zero covariance.
pub fn fit_mvg<T: Scalar>(rows: &[[T; FEATURE_DIM]]) -> (Vec<T>, Vec<T>) {
    let n = rows.len();
    let d = FEATURE_DIM;
    let mut mean = vec![T::zero(); d];
    for r in rows {
        for (m, &v) in mean.iter_mut().zip(r.iter()) {
            *m = *m + v;
        }
    }
    let nf = T::from_count(n.max(1));
    mean.iter_mut().for_each(|m| *m = *m / nf);

    let mut cov = vec![T::zero(); d * d];
    if n > 1 {
        for r in rows {
            for i in 0..d {
                let di = r[i] - mean[i];
                for j in i..d {
                    cov[i * d + j] = cov[i * d + j] + di * (r[j] - mean[j]);
                }
            }
        }
        let denom = T::from_count(n - 1);
        for i in 0..d {
            for j in i..d {
                let v = cov[i * d + j] / denom;
                cov[i * d + j] = v;
                cov[j * d + i] = v;
            }
        }
    }
    (mean, cov)
}

/// SHA-256 over each plane's dimensions and `f64` bit patterns, in order.
pub fn corpus_fingerprint<T: Scalar>(corpus: &[Plane<T>]) -> String {
    let mut h = Sha256::new();
    for p in corpus {
        h.update((p.width() as u64).to_le_bytes());
        h.update((p.height() as u64).to_le_bytes());
        for v in p.as_slice() {
            h.update(v.as_f64().to_bits().to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

impl<T: Scalar> MvgModel<T> {
    pub fn from_features(features: &FeatureMatrix<T>, patch: PatchParams, corpus_fingerprint: String) -> Self {
        let (mean, covariance) = fit_mvg(&features.rows);
        Self {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            feature_dim: FEATURE_DIM,
            patch,
            patch_count: features.len(),
            corpus_fingerprint,
            mean,
            covariance,
        }
    }

    /// Builds a model directly from moments; used for synthetic and imported models.
    pub fn from_moments(mean: Vec<T>, covariance: Vec<T>, patch: PatchParams) -> Result<Self, NiqeError> {
        let m = Self {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            feature_dim: mean.len(),
            patch,
            patch_count: 0,
            corpus_fingerprint: String::new(),
            mean,
            covariance,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), NiqeError> {
        let bad = |msg: String| Err(NiqeError::InvalidModel(msg));
        if self.format != MODEL_FORMAT {
            return bad(format!("unknown format {:?}", self.format));
        }
        if self.version != MODEL_VERSION {
            return bad(format!("unsupported version {}", self.version));
        }
        let d = self.feature_dim;
        if self.mean.len() != d || self.covariance.len() != d * d {
            return bad(format!(
                "expected {d} means and {} covariance entries, found {} and {}",
                d * d,
                self.mean.len(),
                self.covariance.len()
            ));
        }
        if self.mean.iter().chain(&self.covariance).any(|v| !v.is_finite()) {
            return bad("non-finite entry".into());
        }
        for i in 0..d {
            for j in i + 1..d {
                if self.covariance[i * d + j] != self.covariance[j * d + i] {
                    return bad(format!("covariance not symmetric at ({i}, {j})"));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NiqeError> {
        let m: Self = serde_json::from_str(text).map_err(|e| NiqeError::InvalidModel(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json() + "\n")
    }

    pub fn load(path: &Path) -> Result<Self, NiqeError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| NiqeError::InvalidModel(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Fits the pristine model over every selected patch of every corpus image,
/// concatenated in corpus order.
pub fn fit_pristine_model<T: Scalar>(corpus: &[Plane<T>], patch: PatchParams) -> Result<MvgModel<T>, NiqeError> {
    let mut all = FeatureMatrix {
        rows: Vec::new(),
        patch_coords: Vec::new(),
    };
    for img in corpus {
        match extract_features(img, patch) {
            Ok(f) => {
                all.rows.extend(f.rows);
                all.patch_coords.extend(f.patch_coords);
            }
            Err(NiqeError::NoSharpPatches) => continue,
            Err(e) => return Err(e),
        }
    }
    if all.len() < FEATURE_DIM + 1 {
        return Err(NiqeError::InsufficientPatches {
            needed: FEATURE_DIM + 1,
            got: all.len(),
        });
    }
    Ok(MvgModel::from_features(&all, patch, corpus_fingerprint(corpus)))
}

/// `sqrt((ν₁−ν₂)ᵀ ((Σ₁+Σ₂)/2)⁺ (ν₁−ν₂))`.
pub fn mvg_distance<T: Scalar>(a: &MvgModel<T>, b: &MvgModel<T>) -> Result<T, NiqeError> {
    if a.feature_dim != b.feature_dim {
        return Err(NiqeError::DimensionMismatch {
            model: a.feature_dim,
            features: b.feature_dim,
        });
    }
    let d = a.feature_dim;
    let half = T::lit(0.5);
    let pooled: Vec<T> = a
        .covariance
        .iter()
        .zip(&b.covariance)
        .map(|(&x, &y)| (x + y) * half)
        .collect();
    let diff: Vec<T> = a.mean.iter().zip(&b.mean).map(|(&x, &y)| x - y).collect();
    let q = symmetric_eigen(&pooled, d).pinv_quadratic_form(&diff);
    Ok(q.max(T::zero()).sqrt())
}

/// NIQE of a luma plane against a pristine model. Every patch is used (no
/// sharpness selection).
pub fn niqe_score<T: Scalar>(y: &Plane<T>, model: &MvgModel<T>) -> Result<T, NiqeError> {
    let params = PatchParams::scoring(model.patch.patch);
    let features = extract_features(y, params)?;
    let test = MvgModel::from_features(&features, params, String::new());
    mvg_distance(model, &test)
}
