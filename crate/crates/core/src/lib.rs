//! Perception-distortion benchmark harness.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the double-precision types the pipeline uses.

pub mod analysis;
pub mod filter;
pub mod image;
pub mod leaderboard;
pub mod metrics;
pub mod niqe;
pub mod pi;
pub mod study;
mod scalar;
pub mod synth;

pub use scalar::Scalar;

/// Luma plane in gray levels.
pub type YPlane = image::Plane<f64>;
pub type MvgModel = niqe::MvgModel<f64>;
pub type FeatureMatrix = niqe::FeatureMatrix<f64>;
pub type AggdParams = niqe::AggdParams<f64>;
pub type ImagePair = metrics::ImagePair<f64>;
