//! Deterministic dead-leaves imagery.
//!
//! Occluding discs with power-law radii plus fractal texture give scale-invariant,
//! sharp-edged content for smoke tests and toy benchmarks. Generator settings
//! are drawn per seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::image::{Plane, RgbImage};
use crate::Scalar;

const TEXTURE_CELLS: [usize; 5] = [2, 4, 8, 16, 32];

/// Per-image generator settings, drawn from the seed so a corpus spans a range
/// of textures, noise levels and object scales.
struct Style {
    noise_sigma: f64,
    texture_gain: f64,
    min_radius: f64,
    contrast: f64,
}

impl Style {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        Self {
            noise_sigma: rng.random_range(0.3..2.5),
            texture_gain: rng.random_range(0.5..5.0),
            min_radius: rng.random_range(1.0..4.0),
            contrast: rng.random_range(0.5..1.0),
        }
    }
}

struct Leaf {
    cx: f64,
    cy: f64,
    radius: f64,
    color: [f64; 3],
    gradient: [f64; 2],
    texture: f64,
}

/// Sum of bilinearly interpolated random lattices, amplitude growing with the
/// square root of the lattice spacing.
fn fractal_texture(width: usize, height: usize, gain: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = vec![0.0; width * height];
    for &cell in &TEXTURE_CELLS {
        let gw = width / cell + 2;
        let gh = height / cell + 2;
        let grid: Vec<f64> = (0..gw * gh).map(|_| rng.random_range(-1.0..1.0)).collect();
        let amp = gain * (cell as f64).sqrt();
        for y in 0..height {
            let fy = y as f64 / cell as f64;
            let (iy, ty) = (fy.floor() as usize, fy.fract());
            for x in 0..width {
                let fx = x as f64 / cell as f64;
                let (ix, tx) = (fx.floor() as usize, fx.fract());
                let g = |i: usize, j: usize| grid[j * gw + i];
                let top = g(ix, iy) * (1.0 - tx) + g(ix + 1, iy) * tx;
                let bottom = g(ix, iy + 1) * (1.0 - tx) + g(ix + 1, iy + 1) * tx;
                out[y * width + x] += amp * (top * (1.0 - ty) + bottom * ty);
            }
        }
    }
    out
}

fn leaves(width: usize, height: usize, style: &Style, rng: &mut ChaCha8Rng) -> Vec<Leaf> {
    let r_min = style.min_radius;
    let r_max = (width.min(height) as f64 / 3.0).max(r_min * 2.0);
    let (a, b) = (r_min.powi(-2), r_max.powi(-2));
    let count = ((width * height) as f64 / (4.0 * r_min * r_min)).ceil() as usize;
    (0..count)
        .map(|_| {
            let u: f64 = rng.random();
            let radius = (a - u * (a - b)).powf(-0.5);
            let base = 128.0 + style.contrast * rng.random_range(-98.0..98.0);
            let tint = [
                rng.random_range(-25.0..25.0),
                rng.random_range(-25.0..25.0),
                rng.random_range(-25.0..25.0),
            ];
            Leaf {
                cx: rng.random_range(-r_max..width as f64 + r_max),
                cy: rng.random_range(-r_max..height as f64 + r_max),
                radius,
                color: [base + tint[0], base + tint[1], base + tint[2]],
                gradient: [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)],
                texture: rng.random_range(0.0..1.5),
            }
        })
        .collect()
}

fn render(width: usize, height: usize, seed: u64) -> [Vec<f64>; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chans = [
        vec![128.0; width * height],
        vec![128.0; width * height],
        vec![128.0; width * height],
    ];
    let style = Style::draw(&mut rng);
    let texture = fractal_texture(width, height, style.texture_gain, &mut rng);
    for leaf in leaves(width, height, &style, &mut rng) {
        let x0 = (leaf.cx - leaf.radius).floor().max(0.0) as usize;
        let y0 = (leaf.cy - leaf.radius).floor().max(0.0) as usize;
        let x1 = ((leaf.cx + leaf.radius).ceil().max(0.0) as usize).min(width);
        let y1 = ((leaf.cy + leaf.radius).ceil().max(0.0) as usize).min(height);
        let r2 = leaf.radius * leaf.radius;
        for y in y0..y1 {
            for x in x0..x1 {
                let (dx, dy) = (x as f64 - leaf.cx, y as f64 - leaf.cy);
                if dx * dx + dy * dy <= r2 {
                    let shade = leaf.gradient[0] * dx
                        + leaf.gradient[1] * dy
                        + leaf.texture * texture[y * width + x];
                    for (c, ch) in chans.iter_mut().enumerate() {
                        ch[y * width + x] = leaf.color[c] + shade;
                    }
                }
            }
        }
    }
    let noise = Normal::new(0.0, style.noise_sigma).expect("valid sigma");
    for ch in chans.iter_mut() {
        for v in ch.iter_mut() {
            *v = (*v + noise.sample(&mut rng)).clamp(0.0, 255.0);
        }
    }
    chans
}

/// Gray dead-leaves image with values in `[0, 255]`.
pub fn natural_plane<T: Scalar>(width: usize, height: usize, seed: u64) -> Plane<T> {
    let [r, g, b] = render(width, height, seed);
    let data = (0..width * height)
        .map(|i| T::lit((r[i] + g[i] + b[i]) / 3.0))
        .collect();
    Plane::new(width, height, data).expect("non-empty dimensions")
}

/// Color dead-leaves image, quantized to 8 bits.
pub fn natural_rgb(width: usize, height: usize, seed: u64) -> RgbImage {
    let chans = render(width, height, seed);
    let q = |v: f64| v.round().clamp(0.0, 255.0) as u8;
    let pixels = (0..width * height)
        .map(|i| [q(chans[0][i]), q(chans[1][i]), q(chans[2][i])])
        .collect();
    RgbImage::new(width, height, pixels).expect("non-empty dimensions")
}

/// Adds seeded Gaussian noise to every channel.
pub fn add_noise(img: &RgbImage, sigma: f64, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).expect("valid sigma");
    let pixels = img
        .pixels()
        .iter()
        .map(|p| {
            let mut out = [0u8; 3];
            for c in 0..3 {
                out[c] = (p[c] as f64 + noise.sample(&mut rng)).round().clamp(0.0, 255.0) as u8;
            }
            out
        })
        .collect();
    RgbImage::new(img.width(), img.height(), pixels).expect("same dimensions")
}
