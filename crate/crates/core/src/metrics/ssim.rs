//! Structural similarity on 8-bit RGB images.
//!
//! Local statistics are taken over windows that lie entirely inside the
//! image ("valid" positions only), which is what cropping the filter border
//! amounts to. Per-channel scores are averaged.

use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::imagecore::SrgbImage;

/// Window presets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SsimWindow {
    /// 7x7 box with sample (N - 1) covariance normalization.
    #[default]
    Uniform7,
    /// 11x11 Gaussian, sigma 1.5, population covariance.
    Gaussian11,
}

impl SsimWindow {
    pub fn size(self) -> usize {
        match self {
            SsimWindow::Uniform7 => 7,
            SsimWindow::Gaussian11 => 11,
        }
    }

    /// Normalized 1-D taps; the 2-D window is their outer product.
    pub(crate) fn taps(self) -> Vec<f64> {
        match self {
            SsimWindow::Uniform7 => vec![1.0 / 7.0; 7],
            SsimWindow::Gaussian11 => gaussian_taps(11, 1.5),
        }
    }

    fn covariance_scale(self) -> f64 {
        match self {
            SsimWindow::Uniform7 => 49.0 / 48.0,
            SsimWindow::Gaussian11 => 1.0,
        }
    }
}

pub(crate) fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size / 2) as f64;
    let mut t: Vec<f64> = (0..size)
        .map(|i| {
            let x = i as f64 - half;
            (-(x * x) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = t.iter().sum();
    t.iter_mut().for_each(|v| *v /= s);
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SsimSettings {
    pub window: SsimWindow,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimSettings {
    fn default() -> Self {
        Self { window: SsimWindow::Uniform7, k1: 0.01, k2: 0.03, dynamic_range: 255.0 }
    }
}

impl SsimSettings {
    pub fn gaussian() -> Self {
        Self { window: SsimWindow::Gaussian11, ..Self::default() }
    }

    fn constants(&self) -> (f64, f64) {
        ((self.k1 * self.dynamic_range).powi(2), (self.k2 * self.dynamic_range).powi(2))
    }
}

/// One channel as a dense `f64` plane.
#[derive(Clone)]
pub(crate) struct Plane {
    pub w: usize,
    pub h: usize,
    pub v: Vec<f64>,
}

impl Plane {
    pub(crate) fn channels(img: &SrgbImage) -> [Plane; 3] {
        let (w, h) = img.dimensions();
        std::array::from_fn(|c| Plane {
            w,
            h,
            v: img.data().iter().skip(c).step_by(3).map(|&b| b as f64).collect(),
        })
    }

    /// 2x2 average pooling, dropping an odd trailing row or column.
    pub(crate) fn downsample(&self) -> Plane {
        let (w, h) = (self.w / 2, self.h / 2);
        let mut v = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let i = 2 * y * self.w + 2 * x;
                v.push(0.25 * (self.v[i] + self.v[i + 1] + self.v[i + self.w] + self.v[i + self.w + 1]));
            }
        }
        Plane { w, h, v }
    }

    fn product(&self, o: &Plane) -> Plane {
        Plane { w: self.w, h: self.h, v: self.v.iter().zip(&o.v).map(|(a, b)| a * b).collect() }
    }

    /// Separable correlation over valid positions only.
    fn filter_valid(&self, taps: &[f64]) -> Plane {
        let k = taps.len();
        let ow = self.w + 1 - k;
        let oh = self.h + 1 - k;
        let mut tmp = vec![0.0; ow * self.h];
        for y in 0..self.h {
            let row = &self.v[y * self.w..(y + 1) * self.w];
            for x in 0..ow {
                tmp[y * ow + x] = taps.iter().zip(&row[x..x + k]).map(|(t, v)| t * v).sum();
            }
        }
        let mut out = vec![0.0; ow * oh];
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = 0.0;
                for (j, t) in taps.iter().enumerate() {
                    acc += t * tmp[(y + j) * ow + x];
                }
                out[y * ow + x] = acc;
            }
        }
        Plane { w: ow, h: oh, v: out }
    }
}

/// Mean SSIM and mean contrast-structure term of one channel.
pub(crate) fn channel_stats(a: &Plane, b: &Plane, settings: &SsimSettings) -> (f64, f64) {
    let taps = settings.window.taps();
    let (c1, c2) = settings.constants();
    let cov_scale = settings.window.covariance_scale();
    let mu_a = a.filter_valid(&taps);
    let mu_b = b.filter_valid(&taps);
    let aa = a.product(a).filter_valid(&taps);
    let bb = b.product(b).filter_valid(&taps);
    let ab = a.product(b).filter_valid(&taps);
    let n = mu_a.v.len() as f64;
    let (mut ssim_sum, mut cs_sum) = (0.0, 0.0);
    for i in 0..mu_a.v.len() {
        let (ma, mb) = (mu_a.v[i], mu_b.v[i]);
        let va = cov_scale * (aa.v[i] - ma * ma);
        let vb = cov_scale * (bb.v[i] - mb * mb);
        let cov = cov_scale * (ab.v[i] - ma * mb);
        let lum = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        let cs = (2.0 * cov + c2) / (va + vb + c2);
        ssim_sum += lum * cs;
        cs_sum += cs;
    }
    (ssim_sum / n, cs_sum / n)
}

fn check_pair(a: &SrgbImage, b: &SrgbImage) -> Result<(), MetricError> {
    if a.dimensions() != b.dimensions() {
        let ((aw, ah), (bw, bh)) = (a.dimensions(), b.dimensions());
        return Err(MetricError::DimensionMismatch(aw, ah, bw, bh));
    }
    Ok(())
}

pub fn ssim(a: &SrgbImage, b: &SrgbImage, settings: &SsimSettings) -> Result<f64, MetricError> {
    check_pair(a, b)?;
    let win = settings.window.size();
    let (w, h) = a.dimensions();
    if w < win || h < win {
        return Err(MetricError::TooSmall { width: w, height: h, min: win });
    }
    let pa = Plane::channels(a);
    let pb = Plane::channels(b);
    let total: f64 = pa.iter().zip(&pb).map(|(x, y)| channel_stats(x, y, settings).0).sum();
    Ok(total / 3.0)
}

/// Per-scale exponents, finest first, before normalization.
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

/// Smallest side accepted by [`ms_ssim`]: the Gaussian window must still fit
/// after four halvings.
pub const MS_SSIM_MIN_SIDE: usize = 11 << 4;

/// The scale exponents rescaled to sum to exactly one.
pub fn ms_ssim_weights() -> [f64; 5] {
    let s: f64 = MS_SSIM_WEIGHTS.iter().sum();
    MS_SSIM_WEIGHTS.map(|w| w / s)
}

/// Five-scale SSIM with the Gaussian window; contrast-structure at the four
/// finer scales, full SSIM at the coarsest. Negative terms clamp to zero.
pub fn ms_ssim(a: &SrgbImage, b: &SrgbImage) -> Result<f64, MetricError> {
    check_pair(a, b)?;
    let (w, h) = a.dimensions();
    if w < MS_SSIM_MIN_SIDE || h < MS_SSIM_MIN_SIDE {
        return Err(MetricError::TooSmall { width: w, height: h, min: MS_SSIM_MIN_SIDE });
    }
    let settings = SsimSettings::gaussian();
    let weights = ms_ssim_weights();
    let pa = Plane::channels(a);
    let pb = Plane::channels(b);
    let mut total = 0.0;
    for (mut x, mut y) in pa.into_iter().zip(pb) {
        let mut score = 1.0;
        for (level, wt) in weights.iter().enumerate() {
            let (s, cs) = channel_stats(&x, &y, &settings);
            if level + 1 == weights.len() {
                score *= s.max(0.0).powf(*wt);
            } else {
                score *= cs.max(0.0).powf(*wt);
                x = x.downsample();
                y = y.downsample();
            }
        }
        total += score;
    }
    Ok(total / 3.0)
}
