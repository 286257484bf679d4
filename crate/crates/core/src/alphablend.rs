//! Screen-space alpha blending: `B = a*T + b*R - a*b*(T o R)`, with an
//! optional Gaussian blur of `R` standing in for scattering.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imagecore::{srgb_decode, srgb_encode, ImageError, LinearImage, SrgbImage};
use crate::rng::SplitMix64;

#[derive(Debug, Error)]
pub enum BlendError {
    #[error("transmission is {0}x{1} but reflection is {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("{name} must be in [0, 1], got {value}")]
    Param { name: &'static str, value: f64 },
    #[error("blur sigma must be >= 0, got {0}")]
    Sigma(f64),
    #[error("{layer} value {value} at index {index} is outside [0, 1]")]
    OutOfRange { layer: &'static str, index: usize, value: f32 },
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlendParams {
    pub alpha: f64,
    pub beta: f64,
    /// Pixels.
    pub blur_sigma: f64,
}

impl BlendParams {
    pub fn validate(&self) -> Result<(), BlendError> {
        for (name, value) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(BlendError::Param { name, value });
            }
        }
        if !(self.blur_sigma >= 0.0 && self.blur_sigma.is_finite()) {
            return Err(BlendError::Sigma(self.blur_sigma));
        }
        Ok(())
    }
}

/// Sampling ranges for randomized blending parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlendRanges {
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    pub blur_sigma: [f64; 2],
}

impl Default for BlendRanges {
    fn default() -> Self {
        Self { alpha: [0.6, 1.0], beta: [0.1, 0.5], blur_sigma: [0.0, 5.0] }
    }
}

impl BlendRanges {
    pub fn sample(&self, rng: &mut SplitMix64) -> BlendParams {
        BlendParams {
            alpha: rng.uniform(self.alpha[0], self.alpha[1]),
            beta: rng.uniform(self.beta[0], self.beta[1]),
            blur_sigma: rng.uniform(self.blur_sigma[0], self.blur_sigma[1]),
        }
    }
}

/// Color space in which the blend formula is applied to 8-bit inputs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlendSpace {
    /// Directly on normalized sRGB code values.
    #[default]
    Srgb,
    /// On decoded linear values, re-encoded afterwards.
    Linear,
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable Gaussian blur, radius `ceil(3 sigma)`, clamp-to-edge.
/// `sigma == 0` returns the input unchanged.
pub fn gaussian_blur(img: &LinearImage, sigma: f64) -> LinearImage {
    if sigma <= 0.0 {
        return img.clone();
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let (w, h) = img.dimensions();
    let src = img.data();

    let mut tmp = vec![0.0f32; src.len()];
    tmp.par_chunks_mut(w * 3).enumerate().for_each(|(y, out)| {
        let row = &src[y * w * 3..(y + 1) * w * 3];
        for x in 0..w {
            let mut acc = [0.0f64; 3];
            for (k, wt) in kernel.iter().enumerate() {
                let sx = (x as isize + k as isize - radius).clamp(0, w as isize - 1) as usize;
                for c in 0..3 {
                    acc[c] += row[sx * 3 + c] as f64 * wt;
                }
            }
            for c in 0..3 {
                out[x * 3 + c] = acc[c] as f32;
            }
        }
    });

    let mut out = vec![0.0f32; src.len()];
    out.par_chunks_mut(w * 3).enumerate().for_each(|(y, dst)| {
        for x in 0..w {
            let mut acc = [0.0f64; 3];
            for (k, wt) in kernel.iter().enumerate() {
                let sy = (y as isize + k as isize - radius).clamp(0, h as isize - 1) as usize;
                for c in 0..3 {
                    acc[c] += tmp[(sy * w + x) * 3 + c] as f64 * wt;
                }
            }
            for c in 0..3 {
                dst[x * 3 + c] = acc[c] as f32;
            }
        }
    });
    LinearImage::new(w, h, out).expect("blur preserves finiteness")
}

fn check_unit(img: &LinearImage, layer: &'static str) -> Result<(), BlendError> {
    match img.data().iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(index) => Err(BlendError::OutOfRange { layer, index, value: img.data()[index] }),
        None => Ok(()),
    }
}

/// The blend formula for one channel value.
#[inline]
pub fn blend_value(t: f64, r: f64, alpha: f64, beta: f64) -> f64 {
    alpha * t + beta * r - alpha * beta * t * r
}

/// Blend per pixel and channel after blurring `R`. Inputs must lie in `[0, 1]`.
pub fn alpha_blend(
    transmission: &LinearImage,
    reflection: &LinearImage,
    params: &BlendParams,
) -> Result<LinearImage, BlendError> {
    params.validate()?;
    let (tw, th) = transmission.dimensions();
    let (rw, rh) = reflection.dimensions();
    if (tw, th) != (rw, rh) {
        return Err(BlendError::DimensionMismatch(tw, th, rw, rh));
    }
    check_unit(transmission, "transmission")?;
    check_unit(reflection, "reflection")?;
    let blurred = gaussian_blur(reflection, params.blur_sigma);
    let (a, b) = (params.alpha, params.beta);
    let data = transmission
        .data()
        .iter()
        .zip(blurred.data())
        .map(|(&t, &r)| {
            blend_value(t as f64, r as f64, a, b).clamp(0.0, 1.0) as f32
        })
        .collect();
    Ok(LinearImage::new(tw, th, data)?)
}

/// Blend two 8-bit images in the chosen space.
pub fn blend_srgb(
    transmission: &SrgbImage,
    reflection: &SrgbImage,
    params: &BlendParams,
    space: BlendSpace,
) -> Result<SrgbImage, BlendError> {
    match space {
        BlendSpace::Linear => {
            let out = alpha_blend(&srgb_decode(transmission), &srgb_decode(reflection), params)?;
            Ok(srgb_encode(&out)?)
        }
        BlendSpace::Srgb => {
            let norm = |img: &SrgbImage| {
                let data = img.data().iter().map(|&v| v as f32 / 255.0).collect();
                LinearImage::new(img.width(), img.height(), data)
            };
            let out = alpha_blend(&norm(transmission)?, &norm(reflection)?, params)?;
            let bytes = out.data().iter().map(|&v| (v as f64 * 255.0).round() as u8).collect();
            Ok(SrgbImage::new(out.width(), out.height(), bytes)?)
        }
    }
}
