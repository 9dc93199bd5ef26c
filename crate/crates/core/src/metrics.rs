//! Full-reference distortion measures on preprocessed luma planes.

use crate::filter::{filter_valid, gaussian_kernel};
use crate::image::Plane;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("dimension mismatch: ground truth {gt:?} vs estimate {est:?}")]
    DimensionMismatch {
        gt: (usize, usize),
        est: (usize, usize),
    },
    #[error("evaluation set is empty")]
    EmptySet,
    #[error("{width}x{height} plane is smaller than the {window}x{window} SSIM window")]
    TooSmallForWindow {
        width: usize,
        height: usize,
        window: usize,
    },
}

/// Ground truth and estimate, both already converted to luma and border-cropped.
#[derive(Clone, Debug)]
pub struct ImagePair<T> {
    ground_truth: Plane<T>,
    estimate: Plane<T>,
}

impl<T: Scalar> ImagePair<T> {
    pub fn new(ground_truth: Plane<T>, estimate: Plane<T>) -> Result<Self, MetricError> {
        let gt = (ground_truth.width(), ground_truth.height());
        let est = (estimate.width(), estimate.height());
        if gt != est {
            return Err(MetricError::DimensionMismatch { gt, est });
        }
        Ok(Self {
            ground_truth,
            estimate,
        })
    }

    pub fn ground_truth(&self) -> &Plane<T> {
        &self.ground_truth
    }

    pub fn estimate(&self) -> &Plane<T> {
        &self.estimate
    }

    pub fn pixel_count(&self) -> usize {
        self.ground_truth.len()
    }
}

/// Mean squared error over all pixels, in squared gray levels.
pub fn mse_y<T: Scalar>(pair: &ImagePair<T>) -> T {
    let sum: T = pair
        .ground_truth
        .as_slice()
        .iter()
        .zip(pair.estimate.as_slice())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    sum / T::from_count(pair.pixel_count())
}

/// Square root of the mean of per-image MSEs. Not the mean of per-image RMSEs.
pub fn dataset_rmse<T: Scalar>(pairs: &[ImagePair<T>]) -> Result<T, MetricError> {
    let mses: Vec<T> = pairs.iter().map(mse_y).collect();
    rmse_from_mses(&mses)
}

/// Aggregates already computed per-image MSEs in index order.
pub fn rmse_from_mses<T: Scalar>(mses: &[T]) -> Result<T, MetricError> {
    if mses.is_empty() {
        return Err(MetricError::EmptySet);
    }
    let total: T = mses.iter().copied().sum();
    Ok((total / T::from_count(mses.len())).sqrt())
}

/// Peak signal-to-noise ratio for an 8-bit range. Identical inputs give `+inf`.
pub fn psnr<T: Scalar>(pair: &ImagePair<T>) -> T {
    psnr_from_mse(mse_y(pair))
}

pub fn psnr_from_mse<T: Scalar>(mse: T) -> T {
    if mse == T::zero() {
        return T::infinity();
    }
    T::lit(10.0) * (T::lit(255.0 * 255.0) / mse).log10()
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const SSIM_RANGE: f64 = 255.0;

pub fn ssim_constants<T: Scalar>() -> (T, T) {
    let c1 = (SSIM_K1 * SSIM_RANGE).powi(2);
    let c2 = (SSIM_K2 * SSIM_RANGE).powi(2);
    (T::lit(c1), T::lit(c2))
}

/// Mean SSIM over every position where the 11×11 Gaussian window fits (no padding).
pub fn ssim<T: Scalar>(pair: &ImagePair<T>) -> Result<T, MetricError> {
    let (a, b) = (&pair.ground_truth, &pair.estimate);
    let window = gaussian_kernel::<T>(SSIM_WINDOW, SSIM_SIGMA);
    let too_small = || MetricError::TooSmallForWindow {
        width: a.width(),
        height: a.height(),
        window: SSIM_WINDOW,
    };
    let mu_a = filter_valid(a, &window).ok_or_else(too_small)?;
    let mu_b = filter_valid(b, &window).ok_or_else(too_small)?;
    let aa = filter_valid(&a.zip_map(a, |x, y| x * y), &window).ok_or_else(too_small)?;
    let bb = filter_valid(&b.zip_map(b, |x, y| x * y), &window).ok_or_else(too_small)?;
    let ab = filter_valid(&a.zip_map(b, |x, y| x * y), &window).ok_or_else(too_small)?;

    let (c1, c2) = ssim_constants::<T>();
    let two = T::lit(2.0);
    let n = mu_a.len();
    let mut total = T::zero();
    for i in 0..n {
        let ma = mu_a.as_slice()[i];
        let mb = mu_b.as_slice()[i];
        let va = aa.as_slice()[i] - ma * ma;
        let vb = bb.as_slice()[i] - mb * mb;
        let cov = ab.as_slice()[i] - ma * mb;
        let num = (two * ma * mb + c1) * (two * cov + c2);
        let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
        total = total + num / den;
    }
    Ok(total / T::from_count(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane(w: usize, h: usize, f: impl FnMut(usize, usize) -> f64) -> Plane<f64> {
        Plane::from_fn(w, h, f).unwrap()
    }

    #[test]
    fn mse_cases() {
        let a = plane(4, 4, |x, y| (x * y) as f64);
        assert_eq!(mse_y(&ImagePair::new(a.clone(), a.clone()).unwrap()), 0.0);
        let shifted = a.map(|v| v + 5.0);
        assert_eq!(mse_y(&ImagePair::new(a.clone(), shifted).unwrap()), 25.0);
        let z = plane(2, 2, |_, _| 0.0);
        let d = Plane::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(mse_y(&ImagePair::new(z, d).unwrap()), 7.5);
    }

    #[test]
    fn mismatched_pair_rejected() {
        let err = ImagePair::new(plane(3, 3, |_, _| 0.0), plane(3, 4, |_, _| 0.0)).unwrap_err();
        assert!(matches!(err, MetricError::DimensionMismatch { .. }));
    }

    #[test]
    fn rmse_is_root_of_mean_mse() {
        let small = ImagePair::new(plane(2, 2, |_, _| 0.0), plane(2, 2, |_, _| 3.0)).unwrap();
        let large = ImagePair::new(plane(10, 10, |_, _| 0.0), plane(10, 10, |_, _| 4.0)).unwrap();
        let r = dataset_rmse(&[small, large]).unwrap();
        assert!((r - 12.5f64.sqrt()).abs() < 1e-12);
        assert!((r - 3.5).abs() > 0.03);
        assert_eq!(dataset_rmse::<f64>(&[]), Err(MetricError::EmptySet));
    }

    #[test]
    fn psnr_cases() {
        let a = plane(3, 3, |_, _| 0.0);
        assert_eq!(psnr(&ImagePair::new(a.clone(), a.clone()).unwrap()), f64::INFINITY);
        assert!(psnr_from_mse(255.0f64 * 255.0).abs() < 1e-12);
        assert!((psnr_from_mse(25.0f64) - 34.151_403_521_958_37).abs() < 1e-9);
    }

    #[test]
    fn ssim_identity_and_constant_closed_form() {
        let a = plane(16, 16, |x, y| ((x * 7 + y * 13) % 31) as f64 * 8.0);
        assert!((ssim(&ImagePair::new(a.clone(), a).unwrap()).unwrap() - 1.0).abs() < 1e-12);

        let (mu1, mu2) = (100.0, 130.0);
        let p = ImagePair::new(plane(12, 12, |_, _| mu1), plane(12, 12, |_, _| mu2)).unwrap();
        let (c1, _) = ssim_constants::<f64>();
        let expect = (2.0 * mu1 * mu2 + c1) / (mu1 * mu1 + mu2 * mu2 + c1);
        assert!((ssim(&p).unwrap() - expect).abs() < 1e-9);

        let tiny = ImagePair::new(plane(10, 20, |_, _| 1.0), plane(10, 20, |_, _| 1.0)).unwrap();
        assert!(matches!(ssim(&tiny), Err(MetricError::TooSmallForWindow { .. })));
    }
}
