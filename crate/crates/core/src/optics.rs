//! Closed-form optics of a thick dielectric slab.
//!
//! Light hitting the slab splits at the front surface; the refracted part
//! bounces between the two faces, leaking out a geometrically decaying series
//! of laterally shifted copies on both sides. [`ghost_series`] enumerates
//! those copies (the "ghosts"), and [`ghost_totals`] sums them in closed form.
//!
//! Both faces use the same unpolarized Fresnel reflectance. Absorption follows
//! Beer-Lambert with the base color defined as the tint after one traversal of
//! [`ABSORPTION_REFERENCE_DEPTH`] at normal incidence. The metallic parameter
//! adds a tinted front-surface reflection `metallic * (1 - r) * base_color`
//! and scales everything that enters the slab by `1 - metallic`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::Vec3;

/// Slab depth (meters) at which a normal-incidence ray is tinted by exactly
/// `base_color`.
pub const ABSORPTION_REFERENCE_DEPTH: f64 = 0.005;

/// Default number of internal bounces kept per side.
pub const DEFAULT_MAX_ORDER: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum OpticsError {
    #[error("ior must be >= 1, got {0}")]
    Ior(f64),
    #[error("roughness must be in [0, 1], got {0}")]
    Roughness(f64),
    #[error("thickness must be >= 0 meters, got {0}")]
    Thickness(f64),
    #[error("base_color channels must be in (0, 1], got {0:?}")]
    BaseColor([f64; 3]),
    #[error("metallic must be in [0, 1], got {0}")]
    Metallic(f64),
}

/// Optical parameters of the glass plate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlassMaterial {
    pub ior: f64,
    pub roughness: f64,
    /// Meters.
    pub thickness: f64,
    pub base_color: [f64; 3],
    pub metallic: f64,
}

impl Default for GlassMaterial {
    fn default() -> Self {
        Self { ior: 1.5, roughness: 0.0, thickness: 0.005, base_color: [1.0; 3], metallic: 0.0 }
    }
}

impl GlassMaterial {
    /// A plate that does not interact with light at all.
    pub fn invisible() -> Self {
        Self { ior: 1.0, roughness: 0.0, thickness: 0.0, base_color: [1.0; 3], metallic: 0.0 }
    }

    /// The reflection-free counterpart used for ground-truth transmission:
    /// ior 1, no metallic, no roughness and no tint.
    pub fn ground_truth(&self) -> Self {
        Self {
            ior: 1.0,
            roughness: 0.0,
            metallic: 0.0,
            base_color: [1.0; 3],
            thickness: self.thickness,
        }
    }

    pub fn validate(&self) -> Result<(), OpticsError> {
        if !(self.ior >= 1.0 && self.ior.is_finite()) {
            return Err(OpticsError::Ior(self.ior));
        }
        if !(0.0..=1.0).contains(&self.roughness) {
            return Err(OpticsError::Roughness(self.roughness));
        }
        if !(self.thickness >= 0.0 && self.thickness.is_finite()) {
            return Err(OpticsError::Thickness(self.thickness));
        }
        if !self.base_color.iter().all(|&c| c > 0.0 && c <= 1.0) {
            return Err(OpticsError::BaseColor(self.base_color));
        }
        if !(0.0..=1.0).contains(&self.metallic) {
            return Err(OpticsError::Metallic(self.metallic));
        }
        Ok(())
    }
}

/// One ghost image: its RGB throughput and its in-plane shift on the front
/// surface relative to the order-0 path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GhostTerm {
    pub weight: [f64; 3],
    /// Meters.
    pub lateral_offset: f64,
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GhostSeries {
    pub reflected: Vec<GhostTerm>,
    pub transmitted: Vec<GhostTerm>,
}

impl GhostSeries {
    pub fn total_reflected(&self) -> [f64; 3] {
        sum_weights(&self.reflected)
    }

    pub fn total_transmitted(&self) -> [f64; 3] {
        sum_weights(&self.transmitted)
    }
}

fn sum_weights(terms: &[GhostTerm]) -> [f64; 3] {
    let mut acc = [0.0; 3];
    for t in terms {
        for c in 0..3 {
            acc[c] += t.weight[c];
        }
    }
    acc
}

/// Cosine of the refracted angle entering a medium of relative index `n >= 1`.
#[inline]
pub fn refract_cos(cos_theta_i: f64, n: f64) -> f64 {
    let ci = cos_theta_i.clamp(0.0, 1.0);
    let sin2_t = (1.0 - ci * ci) / (n * n);
    (1.0 - sin2_t).max(0.0).sqrt()
}

/// Unpolarized Fresnel reflectance from air into a medium of index `n >= 1`.
pub fn fresnel_unpolarized(cos_theta_i: f64, n: f64) -> f64 {
    if n == 1.0 {
        return 0.0;
    }
    let ci = cos_theta_i.clamp(0.0, 1.0);
    let ct = refract_cos(ci, n);
    let rs = (ci - n * ct) / (ci + n * ct);
    let rp = (ct - n * ci) / (ct + n * ci);
    (0.5 * (rs * rs + rp * rp)).clamp(0.0, 1.0)
}

/// Beer-Lambert transmittance along `path_length` meters inside the glass.
pub fn absorption_factor(material: &GlassMaterial, path_length: f64) -> [f64; 3] {
    let depth = path_length.max(0.0) / ABSORPTION_REFERENCE_DEPTH;
    material.base_color.map(|bc| if bc >= 1.0 { 1.0 } else { bc.powf(depth) })
}

/// Per-incidence quantities shared by the series and its closed form.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SlabResponse {
    /// Dielectric reflectance of one face.
    pub r: f64,
    /// Front-surface reflectance including the metallic lobe.
    pub front: [f64; 3],
    /// One traversal of the slab.
    pub absorb: [f64; 3],
    /// Fraction that enters the slab, `(1 - metallic)`.
    pub dielectric: f64,
    /// `2 * thickness * tan(theta_t)`: offset added per internal round trip.
    pub step: f64,
    pub cos_t: f64,
}

impl SlabResponse {
    pub(crate) fn new(cos_theta_i: f64, m: &GlassMaterial) -> Self {
        let ci = cos_theta_i.clamp(0.0, 1.0);
        let r = fresnel_unpolarized(ci, m.ior);
        let cos_t = refract_cos(ci, m.ior);
        let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
        let tan_t = if cos_t > 0.0 { sin_t / cos_t } else { 0.0 };
        let path = if cos_t > 0.0 { m.thickness / cos_t } else { 0.0 };
        let front = m.base_color.map(|bc| r + m.metallic * (1.0 - r) * bc);
        Self {
            r,
            front,
            absorb: absorption_factor(m, path),
            dielectric: 1.0 - m.metallic,
            step: 2.0 * m.thickness * tan_t,
            cos_t,
        }
    }

    /// Weight of reflected ghost `k`.
    #[inline]
    pub(crate) fn reflected(&self, k: usize) -> [f64; 3] {
        if k == 0 {
            return self.front;
        }
        let base = self.dielectric * (1.0 - self.r).powi(2) * self.r.powi(2 * k as i32 - 1);
        self.absorb.map(|a| base * a.powi(2 * k as i32))
    }

    /// Weight of transmitted ghost `k`.
    #[inline]
    pub(crate) fn transmitted(&self, k: usize) -> [f64; 3] {
        let base = self.dielectric * (1.0 - self.r).powi(2) * self.r.powi(2 * k as i32);
        self.absorb.map(|a| base * a.powi(2 * k as i32 + 1))
    }

    #[inline]
    pub(crate) fn offset(&self, k: usize) -> f64 {
        k as f64 * self.step
    }
}

/// Enumerate ghost terms `0..=max_order` on each side of the slab.
pub fn ghost_series(cos_theta_i: f64, material: &GlassMaterial, max_order: usize) -> GhostSeries {
    let s = SlabResponse::new(cos_theta_i, material);
    let reflected = (0..=max_order)
        .map(|k| GhostTerm { weight: s.reflected(k), lateral_offset: s.offset(k), order: k })
        .collect();
    let transmitted = (0..=max_order)
        .map(|k| GhostTerm { weight: s.transmitted(k), lateral_offset: s.offset(k), order: k })
        .collect();
    GhostSeries { reflected, transmitted }
}

/// Infinite-order reflected and transmitted totals, summed in closed form.
pub fn ghost_totals(cos_theta_i: f64, material: &GlassMaterial) -> ([f64; 3], [f64; 3]) {
    let s = SlabResponse::new(cos_theta_i, material);
    let mut refl = [0.0; 3];
    let mut trans = [0.0; 3];
    for c in 0..3 {
        let a = s.absorb[c];
        let denom = 1.0 - s.r * s.r * a * a;
        let inner = s.dielectric * (1.0 - s.r).powi(2) / denom;
        refl[c] = s.front[c] + inner * s.r * a * a;
        trans[c] = inner * a;
    }
    (refl, trans)
}

/// Sample a GGX microfacet normal in the local frame where `+z` is the macro
/// normal. `alpha = roughness^2`; shadowing-masking is not applied.
pub fn ggx_sample(roughness: f64, u1: f64, u2: f64) -> Vec3 {
    let alpha = roughness * roughness;
    let u1 = u1.clamp(0.0, 1.0 - f64::EPSILON);
    let theta = (alpha * (u1 / (1.0 - u1)).sqrt()).atan();
    let phi = 2.0 * PI * u2;
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vec3::new(st * cp, st * sp, ct)
}
