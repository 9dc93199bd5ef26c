//! Moment-matching fit of the asymmetric generalized Gaussian distribution.

use std::sync::OnceLock;

use statrs::function::gamma::{gamma, ln_gamma};

use super::NiqeError;
use crate::Scalar;

pub const MIN_SAMPLES: usize = 100;

/// Shape search grid: 0.2, 0.201, ..., 10.0.
const GRID_START_MILLI: usize = 200;
const GRID_END_MILLI: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AggdParams<T> {
    pub shape: T,
    pub left_sigma: T,
    pub right_sigma: T,
    pub mean_offset: T,
}

fn grid_alpha(i: usize) -> f64 {
    (GRID_START_MILLI + i) as f64 / 1000.0
}

/// `Γ(2/α)² / (Γ(1/α) Γ(3/α))` over the shape grid.
fn ratio_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..=GRID_END_MILLI - GRID_START_MILLI)
            .map(|i| {
                let a = grid_alpha(i);
                (2.0 * ln_gamma(2.0 / a) - ln_gamma(1.0 / a) - ln_gamma(3.0 / a)).exp()
            })
            .collect()
    })
}

pub fn fit_aggd<T: Scalar>(samples: &[T]) -> Result<AggdParams<T>, NiqeError> {
    if samples.len() < MIN_SAMPLES {
        return Err(NiqeError::TooFewSamples(samples.len()));
    }
    let (mut left_sq, mut left_n) = (0.0f64, 0usize);
    let (mut right_sq, mut right_n) = (0.0f64, 0usize);
    let (mut abs_sum, mut sq_sum) = (0.0f64, 0.0f64);
    for &s in samples {
        let x = s.as_f64();
        if !x.is_finite() {
            return Err(NiqeError::NonFinite);
        }
        let x2 = x * x;
        if x < 0.0 {
            left_sq += x2;
            left_n += 1;
        } else if x > 0.0 {
            right_sq += x2;
            right_n += 1;
        }
        abs_sum += x.abs();
        sq_sum += x2;
    }
    if left_n == 0 || right_n == 0 {
        return Err(NiqeError::DegenerateSamples);
    }
    let n = samples.len() as f64;
    let left_sigma = (left_sq / left_n as f64).sqrt();
    let right_sigma = (right_sq / right_n as f64).sqrt();
    let g = left_sigma / right_sigma;
    let r_hat = (abs_sum / n).powi(2) / (sq_sum / n);
    let r_hat_norm = r_hat * (g.powi(3) + 1.0) * (g + 1.0) / (g * g + 1.0).powi(2);

    let mut best = 0usize;
    let mut best_err = f64::INFINITY;
    for (i, r) in ratio_table().iter().enumerate() {
        let e = (r - r_hat_norm).powi(2);
        if e < best_err {
            best_err = e;
            best = i;
        }
    }
    let shape = grid_alpha(best);
    let mean_offset = (right_sigma - left_sigma) * (gamma(2.0 / shape) / gamma(1.0 / shape))
        * (gamma(1.0 / shape) / gamma(3.0 / shape)).sqrt();
    Ok(AggdParams {
        shape: T::lit(shape),
        left_sigma: T::lit(left_sigma),
        right_sigma: T::lit(right_sigma),
        mean_offset: T::lit(mean_offset),
    })
}
