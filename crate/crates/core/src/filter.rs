//! Separable linear filtering on planes.

use crate::image::Plane;
use crate::Scalar;

/// Maps an out-of-range index into `[0, len)` by half-sample symmetric
/// reflection (`-1 -> 0`, `len -> len - 1`).
pub fn reflect(i: isize, len: usize) -> usize {
    let n = len as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Normalized 1-D Gaussian of `size` taps.
pub fn gaussian_kernel<T: Scalar>(size: usize, sigma: f64) -> Vec<T> {
    assert!(size >= 1);
    let half = (size as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - half;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| T::lit(v / total)).collect()
}

/// Correlates with `kernel` along both axes, same output size, symmetric edge extension.
pub fn filter_same<T: Scalar>(plane: &Plane<T>, kernel: &[T]) -> Plane<T> {
    let (w, h) = (plane.width(), plane.height());
    let r = (kernel.len() / 2) as isize;
    let src = plane.as_slice();
    let mut tmp = vec![T::zero(); w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = T::zero();
            for (k, &kv) in kernel.iter().enumerate() {
                acc = acc + kv * row[reflect(x as isize + k as isize - r, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![T::zero(); w * h];
    for y in 0..h {
        for (k, &kv) in kernel.iter().enumerate() {
            let sy = reflect(y as isize + k as isize - r, h);
            let srow = &tmp[sy * w..(sy + 1) * w];
            let orow = &mut out[y * w..(y + 1) * w];
            for (o, &s) in orow.iter_mut().zip(srow) {
                *o = *o + kv * s;
            }
        }
    }
    Plane::new(w, h, out).expect("same dimensions as input")
}

/// Correlates with `kernel` along both axes keeping only positions where the
/// kernel fits entirely inside the plane.
pub fn filter_valid<T: Scalar>(plane: &Plane<T>, kernel: &[T]) -> Option<Plane<T>> {
    let (w, h) = (plane.width(), plane.height());
    let k = kernel.len();
    if w < k || h < k {
        return None;
    }
    let (ow, oh) = (w - k + 1, h - k + 1);
    let src = plane.as_slice();
    let mut tmp = vec![T::zero(); ow * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            let mut acc = T::zero();
            for (i, &kv) in kernel.iter().enumerate() {
                acc = acc + kv * row[x + i];
            }
            tmp[y * ow + x] = acc;
        }
    }
    let mut out = vec![T::zero(); ow * oh];
    for y in 0..oh {
        let orow = &mut out[y * ow..(y + 1) * ow];
        for (i, &kv) in kernel.iter().enumerate() {
            let srow = &tmp[(y + i) * ow..(y + i + 1) * ow];
            for (o, &s) in orow.iter_mut().zip(srow) {
                *o = *o + kv * s;
            }
        }
    }
    Plane::new(ow, oh, out).ok()
}

/// Gaussian blur with a kernel truncated at `ceil(3σ)`; `σ ≤ 0` returns a copy.
pub fn gaussian_blur<T: Scalar>(plane: &Plane<T>, sigma: f64) -> Plane<T> {
    if sigma <= 0.0 {
        return plane.clone();
    }
    let radius = (3.0 * sigma).ceil() as usize;
    let kernel = gaussian_kernel::<T>(2 * radius + 1, sigma);
    filter_same(plane, &kernel)
}
