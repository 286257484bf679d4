//! 8-bit image quality metrics and the composite training loss scalar.

mod report;
mod ssim;

pub use report::{evaluate_dirs, EvalMeans, EvalRecord, EvalReport};
pub use ssim::{ms_ssim, ms_ssim_weights, ssim, SsimSettings, SsimWindow, MS_SSIM_MIN_SIDE, MS_SSIM_WEIGHTS};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imagecore::{ImageError, SrgbImage};

/// Value reported for identical images.
pub const PSNR_CAP_DB: f64 = 100.0;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("image {width}x{height} is too small; minimum side is {min}")]
    TooSmall { width: usize, height: usize, min: usize },
    #[error("loss weights must be finite and nonnegative")]
    BadWeights,
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("{0}")]
    Io(String),
}

pub fn psnr(a: &SrgbImage, b: &SrgbImage) -> Result<f64, MetricError> {
    if a.dimensions() != b.dimensions() {
        let ((aw, ah), (bw, bh)) = (a.dimensions(), b.dimensions());
        return Err(MetricError::DimensionMismatch(aw, ah, bw, bh));
    }
    let sq: u64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    if sq == 0 {
        return Ok(PSNR_CAP_DB);
    }
    let mse = sq as f64 / a.data().len() as f64;
    Ok((10.0 * (255.0f64 * 255.0 / mse).log10()).min(PSNR_CAP_DB))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_psnr: f64,
    pub lambda_ssim: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { lambda_psnr: 0.1, lambda_ssim: 20.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), MetricError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if ok(self.lambda_psnr) && ok(self.lambda_ssim) {
            Ok(())
        } else {
            Err(MetricError::BadWeights)
        }
    }

    /// `lambda_psnr * (-psnr) + lambda_ssim * (1 - ssim)`.
    pub fn combine(&self, psnr_db: f64, ssim_score: f64) -> f64 {
        self.lambda_psnr * -psnr_db + self.lambda_ssim * (1.0 - ssim_score)
    }
}

/// Composite loss of a prediction against ground truth, using the default
/// SSIM preset.
pub fn composite_loss(pred: &SrgbImage, gt: &SrgbImage, weights: &LossWeights) -> Result<f64, MetricError> {
    weights.validate()?;
    let p = psnr(pred, gt)?;
    let s = ssim(pred, gt, &SsimSettings::default())?;
    Ok(weights.combine(p, s))
}
