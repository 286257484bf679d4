use std::f64::consts::PI;

use crate::math::Vec3;

use super::{bilerp, ImageError, LinearImage};

/// Equirectangular environment map.
///
/// Orientation: `u = (atan2(d.x, -d.z) + pi) / 2pi`, `v = acos(d.y) / pi`.
/// `-z` maps to the horizontal center of the image and `+y` to the top row.
#[derive(Debug, Clone)]
pub struct EnvMap {
    image: LinearImage,
    exposure: f64,
}

impl EnvMap {
    pub fn new(image: LinearImage, exposure: f64) -> Result<Self, ImageError> {
        if !(exposure.is_finite() && exposure > 0.0) {
            return Err(ImageError::BadExposure(exposure));
        }
        if image.width() == 0 || image.height() == 0 {
            return Err(ImageError::ZeroSize { width: image.width(), height: image.height() });
        }
        Ok(Self { image, exposure })
    }

    pub fn image(&self) -> &LinearImage {
        &self.image
    }

    pub fn exposure(&self) -> f64 {
        self.exposure
    }

    /// Radiance arriving from `direction`, which must be unit length.
    pub fn sample(&self, direction: Vec3) -> Result<[f64; 3], ImageError> {
        let norm = direction.length();
        if !((norm - 1.0).abs() <= 1e-6) {
            return Err(ImageError::NonUnitDirection { norm });
        }
        Ok(self.sample_unchecked(direction))
    }

    /// [`EnvMap::sample`] without the unit-length check; used on the render
    /// hot path where directions are normalized by construction.
    #[inline]
    pub fn sample_unchecked(&self, d: Vec3) -> [f64; 3] {
        let (u, v) = direction_to_uv(d);
        let mut rgb = self.lookup_uv(u, v);
        for c in rgb.iter_mut() {
            *c *= self.exposure;
        }
        rgb
    }

    /// Bilinear lookup at `(u, v)` with horizontal wrap and vertical clamp,
    /// before exposure scaling.
    pub fn lookup_uv(&self, u: f64, v: f64) -> [f64; 3] {
        let (w, h) = self.image.dimensions();
        let fx = u * w as f64 - 0.5;
        let fy = (v * h as f64 - 0.5).clamp(0.0, (h - 1) as f64);
        let x0f = fx.floor();
        let tx = fx - x0f;
        let x0 = (x0f as i64).rem_euclid(w as i64) as usize;
        let x1 = (x0 + 1) % w;
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let ty = fy - y0 as f64;
        bilerp(&self.image, x0, x1, y0, y1, tx, ty)
    }
}

#[inline]
pub fn direction_to_uv(d: Vec3) -> (f64, f64) {
    let u = (d.x.atan2(-d.z) + PI) / (2.0 * PI);
    let v = d.y.clamp(-1.0, 1.0).acos() / PI;
    (u, v)
}
