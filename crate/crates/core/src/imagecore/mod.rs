//! Image buffers, sRGB transfer functions, resampling and environment maps.
//!
//! [`LinearImage`] is the working representation everywhere: row-major RGB
//! triples of `f32` linear radiance. [`SrgbImage`] is what lands on disk and
//! what the metrics consume.

mod envmap;
mod io;
mod resample;

use std::path::PathBuf;
use std::sync::OnceLock;

use thiserror::Error;

pub use envmap::EnvMap;
pub use io::{load_image, load_srgb, read_raw, save_png, write_raw};
pub use resample::resample_lanczos;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("buffer length {len} does not match {width}x{height}x3")]
    BadLength { width: usize, height: usize, len: usize },
    #[error("non-finite value at pixel {pixel} (component {component})")]
    NonFinite { pixel: usize, component: usize },
    #[error("target size must be at least 1x1, got {width}x{height}")]
    ZeroSize { width: usize, height: usize },
    #[error("direction is not unit length (|d| = {norm})")]
    NonUnitDirection { norm: f64 },
    #[error("exposure must be finite and positive, got {0}")]
    BadExposure(f64),
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("{path}: {reason}")]
    Decode { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Rgb = [f32; 3];

/// Row-major RGB linear radiance.
///
/// Values are finite. They are normally nonnegative, but resampling with
/// negative filter lobes may leave small negative values, which are kept
/// until the image is encoded.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl LinearImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self, ImageError> {
        if data.len() != width * height * 3 {
            return Err(ImageError::BadLength { width, height, len: data.len() });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(ImageError::NonFinite { pixel: i / 3, component: i % 3 });
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0.0; width * height * 3] }
    }

    pub fn filled(width: usize, height: usize, rgb: Rgb) -> Self {
        let data = std::iter::repeat_n(rgb, width * height).flatten().collect();
        Self { width, height, data }
    }

    /// Build from a per-pixel closure `f(x, y)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Rgb) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self { width, height, data }
    }

    /// Wrap an already-validated buffer. Callers guarantee the length.
    pub(crate) fn from_raw_unchecked(width: usize, height: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), width * height * 3);
        Self { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: Rgb) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Bilinear lookup at continuous pixel coordinates (pixel centers at
    /// half-integers), clamping to the edge on both axes.
    pub fn sample_bilinear_clamped(&self, fx: f64, fy: f64) -> [f64; 3] {
        let x = (fx - 0.5).clamp(0.0, (self.width - 1) as f64);
        let y = (fy - 0.5).clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let tx = x - x0 as f64;
        let ty = y - y0 as f64;
        bilerp(self, x0, x1, y0, y1, tx, ty)
    }

    pub fn mean(&self) -> [f64; 3] {
        let mut acc = [0.0f64; 3];
        for px in self.data.chunks_exact(3) {
            for c in 0..3 {
                acc[c] += px[c] as f64;
            }
        }
        let n = (self.width * self.height).max(1) as f64;
        acc.map(|v| v / n)
    }

    /// Mean Rec. 709 luminance.
    pub fn mean_luminance(&self) -> f64 {
        let [r, g, b] = self.mean();
        0.2126 * r + 0.7152 * g + 0.0722 * b
    }

    pub fn scale(&mut self, k: f32) {
        self.data.iter_mut().for_each(|v| *v *= k);
    }

    /// Copy out the `w`x`h` window at `(x0, y0)`. The window must be in bounds.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> LinearImage {
        assert!(x0 + w <= self.width && y0 + h <= self.height, "crop out of bounds");
        let mut data = Vec::with_capacity(w * h * 3);
        for y in y0..y0 + h {
            let start = (y * self.width + x0) * 3;
            data.extend_from_slice(&self.data[start..start + w * 3]);
        }
        LinearImage { width: w, height: h, data }
    }
}

#[inline]
pub(crate) fn bilerp(
    img: &LinearImage,
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
    tx: f64,
    ty: f64,
) -> [f64; 3] {
    let a = img.pixel(x0, y0);
    let b = img.pixel(x1, y0);
    let c = img.pixel(x0, y1);
    let d = img.pixel(x1, y1);
    let mut out = [0.0; 3];
    for k in 0..3 {
        let top = a[k] as f64 + (b[k] as f64 - a[k] as f64) * tx;
        let bot = c[k] as f64 + (d[k] as f64 - c[k] as f64) * tx;
        out[k] = top + (bot - top) * ty;
    }
    out
}

/// Row-major RGB, 8 bits per channel, sRGB encoded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SrgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl SrgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if data.len() != width * height * 3 {
            return Err(ImageError::BadLength { width, height, len: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let data = std::iter::repeat_n(rgb, width * height).flatten().collect();
        Self { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }
}

fn decode_lut() -> &'static [f32; 256] {
    static LUT: OnceLock<[f32; 256]> = OnceLock::new();
    LUT.get_or_init(|| {
        let mut lut = [0.0f32; 256];
        for (i, v) in lut.iter_mut().enumerate() {
            *v = srgb_to_linear(i as f64 / 255.0) as f32;
        }
        lut
    })
}

/// The sRGB EOTF on a normalized value.
#[inline]
pub fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

/// The sRGB OETF on a normalized value.
#[inline]
pub fn linear_to_srgb(l: f64) -> f64 {
    if l <= 0.003_130_8 {
        l * 12.92
    } else {
        1.055 * l.powf(1.0 / 2.4) - 0.055
    }
}

/// Encode one linear value to 8 bits: clamp, OETF, round half away from zero.
#[inline]
pub fn encode_channel(l: f32) -> u8 {
    let c = linear_to_srgb((l as f64).clamp(0.0, 1.0));
    (c * 255.0).round() as u8
}

pub fn srgb_decode(img: &SrgbImage) -> LinearImage {
    let lut = decode_lut();
    let data = img.data.iter().map(|&v| lut[v as usize]).collect();
    LinearImage::from_raw_unchecked(img.width, img.height, data)
}

pub fn srgb_encode(img: &LinearImage) -> Result<SrgbImage, ImageError> {
    let mut data = Vec::with_capacity(img.data.len());
    for (i, &v) in img.data.iter().enumerate() {
        if !v.is_finite() {
            return Err(ImageError::NonFinite { pixel: i / 3, component: i % 3 });
        }
        data.push(encode_channel(v));
    }
    Ok(SrgbImage { width: img.width, height: img.height, data })
}
