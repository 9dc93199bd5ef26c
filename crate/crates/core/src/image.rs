//! Image preprocessing shared by every metric: PNG loading, luma conversion,
//! border cropping, and anti-aliased bicubic resampling.

use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::filter::reflect;
use crate::Scalar;

#[derive(Debug, thiserror::Error)]
pub enum ImageError {
    #[error("image file not found: {0}")]
    Missing(PathBuf),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot decode {path} as PNG: {reason}")]
    Decode { path: PathBuf, reason: String },
    #[error("cannot encode PNG {path}: {reason}")]
    Encode { path: PathBuf, reason: String },
    #[error("invalid image dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },
    #[error("buffer holds {actual} values, expected {expected}")]
    BufferLength { expected: usize, actual: usize },
    #[error("{width}x{height} image too small for a {border}-pixel border")]
    TooSmallForBorder {
        width: usize,
        height: usize,
        border: usize,
    },
    #[error("{width}x{height} image is not divisible by factor {factor}")]
    NotDivisible {
        width: usize,
        height: usize,
        factor: usize,
    },
    #[error("resampling factor must be at least 1")]
    ZeroFactor,
}

/// 8-bit RGB image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidDimensions { width, height });
        }
        if pixels.len() != width * height {
            return Err(ImageError::BufferLength {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self, ImageError> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    /// Replicates a gray plane into all three channels, rounding and clamping to `[0, 255]`.
    pub fn from_gray<T: Scalar>(plane: &Plane<T>) -> Self {
        let pixels = plane
            .as_slice()
            .iter()
            .map(|&v| {
                let q = quantize(v);
                [q, q, q]
            })
            .collect();
        Self {
            width: plane.width(),
            height: plane.height(),
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    /// Splits into three real-valued channel planes.
    pub fn channels<T: Scalar>(&self) -> [Plane<T>; 3] {
        let mk = |c: usize| Plane {
            width: self.width,
            height: self.height,
            data: self.pixels.iter().map(|p| T::lit(p[c] as f64)).collect(),
        };
        [mk(0), mk(1), mk(2)]
    }

    /// Rounds and clamps three channel planes back into an 8-bit image.
    pub fn from_channels<T: Scalar>(channels: &[Plane<T>; 3]) -> Result<Self, ImageError> {
        let (w, h) = (channels[0].width, channels[0].height);
        for c in &channels[1..] {
            if c.width != w || c.height != h {
                return Err(ImageError::BufferLength {
                    expected: w * h,
                    actual: c.len(),
                });
            }
        }
        let pixels = (0..w * h)
            .map(|i| {
                [
                    quantize(channels[0].data[i]),
                    quantize(channels[1].data[i]),
                    quantize(channels[2].data[i]),
                ]
            })
            .collect();
        Self::new(w, h, pixels)
    }

    pub fn save_png(&self, path: &Path) -> Result<(), ImageError> {
        let raw: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        let buf = image::RgbImage::from_raw(self.width as u32, self.height as u32, raw)
            .expect("buffer length checked at construction");
        let file = std::fs::File::create(path).map_err(|source| ImageError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        buf.write_to(&mut BufWriter::new(file), image::ImageFormat::Png)
            .map_err(|e| ImageError::Encode {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })
    }
}

fn quantize<T: Scalar>(v: T) -> u8 {
    let v = v.as_f64().round();
    v.clamp(0.0, 255.0) as u8
}

/// Single-channel real-valued image, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Scalar> Plane<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidDimensions { width, height });
        }
        if data.len() != width * height {
            return Err(ImageError::BufferLength {
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> T,
    ) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.data[y * self.width + x] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!((self.width, self.height), (other.width, other.height));
        Self {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn mean(&self) -> T {
        self.data.iter().copied().sum::<T>() / T::from_count(self.data.len())
    }

    /// Copies the `w`×`h` window whose top-left corner is `(x0, y0)`.
    pub fn sub_plane(&self, x0: usize, y0: usize, w: usize, h: usize) -> Self {
        assert!(x0 + w <= self.width && y0 + h <= self.height);
        let mut data = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            data.extend_from_slice(&self.data[y * self.width + x0..y * self.width + x0 + w]);
        }
        Self {
            width: w,
            height: h,
            data,
        }
    }

    pub fn cast<U: Scalar>(&self) -> Plane<U> {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// RGB to luma matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LumaMatrix {
    /// ITU-R BT.601 studio swing, Y in `[16, 235]`.
    #[default]
    Bt601Studio,
    /// ITU-R BT.601 full range, Y in `[0, 255]`.
    Bt601Full,
}

impl LumaMatrix {
    fn coefficients(self) -> ([f64; 3], f64) {
        match self {
            LumaMatrix::Bt601Studio => ([65.481, 128.553, 24.966], 16.0),
            LumaMatrix::Bt601Full => ([0.299 * 255.0, 0.587 * 255.0, 0.114 * 255.0], 0.0),
        }
    }

    /// Luma of a single real-valued RGB triple in gray levels.
    pub fn luma<T: Scalar>(self, rgb: [T; 3]) -> T {
        let (k, offset) = self.coefficients();
        let inv = T::lit(1.0 / 255.0);
        T::lit(k[0]) * rgb[0] * inv
            + T::lit(k[1]) * rgb[1] * inv
            + T::lit(k[2]) * rgb[2] * inv
            + T::lit(offset)
    }
}

/// Decodes a PNG (8-bit RGB, RGBA or grayscale) into an RGB image. Grayscale is
/// replicated into all three channels; alpha is discarded.
pub fn load_image(path: &Path) -> Result<RgbImage, ImageError> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(ImageError::Missing(path.to_path_buf()))
        }
        Err(source) => {
            return Err(ImageError::Io {
                path: path.to_path_buf(),
                source,
            })
        }
    };
    decode_png(&bytes).map_err(|reason| ImageError::Decode {
        path: path.to_path_buf(),
        reason,
    })
}

fn decode_png(bytes: &[u8]) -> Result<RgbImage, String> {
    let format = image::guess_format(bytes).map_err(|e| e.to_string())?;
    if format != image::ImageFormat::Png {
        return Err(format!("unsupported format {format:?}"));
    }
    let decoded =
        image::load_from_memory_with_format(bytes, image::ImageFormat::Png).map_err(|e| e.to_string())?;
    use image::DynamicImage as D;
    let rgb = match decoded {
        D::ImageLuma8(_) | D::ImageLumaA8(_) | D::ImageRgb8(_) | D::ImageRgba8(_) => decoded.to_rgb8(),
        other => return Err(format!("unsupported pixel layout {:?}", other.color())),
    };
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let pixels = rgb.pixels().map(|p| p.0).collect();
    RgbImage::new(w, h, pixels).map_err(|e| e.to_string())
}

/// Converts to luma in full floating precision (no rounding).
pub fn rgb_to_y<T: Scalar>(img: &RgbImage, matrix: LumaMatrix) -> Plane<T> {
    let data = img
        .pixels
        .iter()
        .map(|p| matrix.luma([T::lit(p[0] as f64), T::lit(p[1] as f64), T::lit(p[2] as f64)]))
        .collect();
    Plane {
        width: img.width,
        height: img.height,
        data,
    }
}

/// Removes `border` pixels from every side.
pub fn crop_border<T: Scalar>(plane: &Plane<T>, border: usize) -> Result<Plane<T>, ImageError> {
    if plane.width <= 2 * border || plane.height <= 2 * border {
        return Err(ImageError::TooSmallForBorder {
            width: plane.width,
            height: plane.height,
            border,
        });
    }
    Ok(plane.sub_plane(
        border,
        border,
        plane.width - 2 * border,
        plane.height - 2 * border,
    ))
}

/// Cubic convolution kernel with `a = -0.5`.
pub fn cubic(x: f64) -> f64 {
    let ax = x.abs();
    let ax2 = ax * ax;
    let ax3 = ax2 * ax;
    if ax <= 1.0 {
        1.5 * ax3 - 2.5 * ax2 + 1.0
    } else if ax <= 2.0 {
        -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0
    } else {
        0.0
    }
}

/// Taps for one output coordinate: input indices (already edge-extended) and
/// normalized weights.
#[derive(Clone, Debug)]
pub(crate) struct Taps {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Per-output-sample taps for an integer downscale by `factor` along an axis of
/// length `len`. The kernel is stretched by `factor` (anti-aliasing).
pub(crate) fn downsample_taps(len: usize, factor: usize) -> Vec<Taps> {
    let f = factor as f64;
    let out_len = len / factor;
    let support = 2.0 * f;
    (0..out_len)
        .map(|o| {
            let center = (o as f64 + 0.5) * f - 0.5;
            let first = (center - support).floor() as isize;
            let last = (center + support).ceil() as isize;
            let mut indices = Vec::new();
            let mut weights = Vec::new();
            for j in first..=last {
                let w = cubic((center - j as f64) / f) / f;
                if w != 0.0 {
                    indices.push(reflect(j, len));
                    weights.push(w);
                }
            }
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            Taps { indices, weights }
        })
        .collect()
}

/// Bicubic downscale of a real-valued plane by an integer factor, separable,
/// with symmetric edge extension.
pub fn downsample_plane<T: Scalar>(plane: &Plane<T>, factor: usize) -> Result<Plane<T>, ImageError> {
    if factor == 0 {
        return Err(ImageError::ZeroFactor);
    }
    if !plane.width.is_multiple_of(factor) || !plane.height.is_multiple_of(factor) {
        return Err(ImageError::NotDivisible {
            width: plane.width,
            height: plane.height,
            factor,
        });
    }
    if factor == 1 {
        return Ok(plane.clone());
    }
    let (ow, oh) = (plane.width / factor, plane.height / factor);
    let xt = downsample_taps(plane.width, factor);
    let yt = downsample_taps(plane.height, factor);

    // Horizontal pass.
    let mut tmp = vec![T::zero(); ow * plane.height];
    for y in 0..plane.height {
        let row = plane.row(y);
        for (ox, taps) in xt.iter().enumerate() {
            let mut acc = T::zero();
            for (&i, &w) in taps.indices.iter().zip(&taps.weights) {
                acc = acc + row[i] * T::lit(w);
            }
            tmp[y * ow + ox] = acc;
        }
    }
    // Vertical pass.
    let mut out = vec![T::zero(); ow * oh];
    for (oy, taps) in yt.iter().enumerate() {
        for ox in 0..ow {
            let mut acc = T::zero();
            for (&i, &w) in taps.indices.iter().zip(&taps.weights) {
                acc = acc + tmp[i * ow + ox] * T::lit(w);
            }
            out[oy * ow + ox] = acc;
        }
    }
    Plane::new(ow, oh, out)
}

/// Bicubic downscale of an RGB image, channel by channel, rounded back to 8 bits.
pub fn bicubic_downsample(img: &RgbImage, factor: usize) -> Result<RgbImage, ImageError> {
    if factor == 1 {
        return Ok(img.clone());
    }
    let [r, g, b] = img.channels::<f64>();
    let out = [
        downsample_plane(&r, factor)?,
        downsample_plane(&g, factor)?,
        downsample_plane(&b, factor)?,
    ];
    RgbImage::from_channels(&out)
}
