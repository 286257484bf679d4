//! Pixel-aligned (blended, transmission, reflection) triplet rendering.
//!
//! Each pixel traces one camera ray to the glass plate. The transmitted side
//! is deterministic: the ghost series is evaluated against the background
//! plane once per pixel. The reflected side is Monte Carlo over GGX
//! microfacet normals; every ghost order reuses the sample's perturbed
//! direction. Ghost weights use the macro-surface incidence angle.
//!
//! Random numbers come from a counter-based hash of `(seed, pixel, sample)`,
//! so output does not depend on the thread count.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imagecore::{save_png, srgb_encode, write_raw, ImageError, LinearImage};
use crate::math::{tangent_frame, Vec3};
use crate::optics::{ggx_sample, GlassMaterial, OpticsError, SlabResponse, DEFAULT_MAX_ORDER};
use crate::rng;
use crate::scene::{intersect_infinite, intersect_plane, Ray, ReflectionSource, Scene};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("invalid material: {0}")]
    Material(#[from] OpticsError),
    #[error("spp must be >= 1")]
    ZeroSpp,
    #[error(
        "{:.2}% of primary lookups missed the textured planes (limit {:.2}%); \
         move the planes or reduce glass tilt",
        .miss_fraction * 100.0, .threshold * 100.0
    )]
    Coverage { miss_fraction: f64, threshold: f64 },
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RefractionMode {
    /// The order-0 transmitted ray continues along the camera ray.
    #[default]
    Aligned,
    /// The order-0 transmitted ray carries the slab's lateral displacement.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderSettings {
    pub spp: u32,
    pub max_order: usize,
    pub seed: u64,
    pub refraction_mode: RefractionMode,
    /// Largest tolerated fraction of primary lookups that miss a plane.
    pub miss_threshold: f64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            spp: 16,
            max_order: DEFAULT_MAX_ORDER,
            seed: 0,
            refraction_mode: RefractionMode::Aligned,
            miss_threshold: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RenderTriple {
    pub blended: LinearImage,
    pub transmission: LinearImage,
    pub reflection: LinearImage,
    /// Fraction of order-0 lookups (transmitted per pixel, reflected per
    /// sample) that left the textured planes.
    pub miss_fraction: f64,
    /// Worst-case transmitted pixel shift; zero in aligned mode.
    pub max_shift_px: f64,
}

impl RenderTriple {
    /// Write `B.png`, `T.png` and `R.png` into `dir`.
    pub fn write_pngs(&self, dir: &Path) -> Result<(), ImageError> {
        std::fs::create_dir_all(dir)
            .map_err(|source| ImageError::Io { path: dir.to_path_buf(), source })?;
        save_png(&srgb_encode(&self.blended)?, dir.join("B.png"))?;
        save_png(&srgb_encode(&self.transmission)?, dir.join("T.png"))?;
        save_png(&srgb_encode(&self.reflection)?, dir.join("R.png"))
    }

    /// Write `B.raw`, `T.raw` and `R.raw` (see [`write_raw`]).
    pub fn write_raw(&self, dir: &Path) -> Result<(), ImageError> {
        write_raw(&self.blended, dir.join("B.raw"))?;
        write_raw(&self.transmission, dir.join("T.raw"))?;
        write_raw(&self.reflection, dir.join("R.raw"))
    }
}

/// Refracted direction entering glass of index `ior` through a face whose
/// unit normal `n` faces the incoming ray.
#[inline]
fn refract_dir(d: Vec3, n: Vec3, ior: f64, cos_i: f64, cos_t: f64) -> Vec3 {
    let eta = 1.0 / ior;
    d * eta + n * (eta * cos_i - cos_t)
}

/// Per-pixel geometry at the glass.
struct GlassHit {
    ray: Ray,
    point: Vec3,
    cos_i: f64,
    /// Unit in-plane direction along which ghosts are displaced.
    slide: Vec3,
}

fn glass_hit(scene: &Scene, ray: Ray) -> Option<GlassHit> {
    let n = scene.glass.normal;
    let t = scene.glass.hit(&ray)?;
    let dn = ray.dir.dot(n);
    let tangential = ray.dir - n * dn;
    let len = tangential.length();
    let slide = if len > 1e-12 { tangential * (1.0 / len) } else { Vec3::ZERO };
    Some(GlassHit { ray, point: ray.at(t), cos_i: dn.abs().min(1.0), slide })
}

/// Origin of the order-0 transmitted ray after the slab.
fn transmitted_origin(hit: &GlassHit, scene: &Scene, m: &GlassMaterial, mode: RefractionMode, cos_t: f64) -> Vec3 {
    match mode {
        RefractionMode::Aligned => hit.point,
        RefractionMode::Exact => {
            if m.thickness == 0.0 || cos_t <= 0.0 {
                return hit.point;
            }
            let inside = refract_dir(hit.ray.dir, scene.glass.normal, m.ior, hit.cos_i, cos_t);
            // Distance along `inside` to the back face, `thickness` below the front.
            let depth = m.thickness / (-inside.dot(scene.glass.normal));
            hit.point + inside * depth
        }
    }
}

#[derive(Default, Clone, Copy)]
struct Tally {
    lookups: u64,
    misses: u64,
}

impl Tally {
    fn add(&mut self, o: Tally) {
        self.lookups += o.lookups;
        self.misses += o.misses;
    }
}

fn transmitted_radiance(
    scene: &Scene,
    m: &GlassMaterial,
    settings: &RenderSettings,
    hit: &GlassHit,
    slab: &SlabResponse,
    tally: &mut Tally,
) -> [f64; 3] {
    let base = transmitted_origin(hit, scene, m, settings.refraction_mode, slab.cos_t);
    let mut acc = [0.0; 3];
    for k in 0..=settings.max_order {
        let w = slab.transmitted(k);
        if w == [0.0; 3] {
            continue;
        }
        let ray = Ray { origin: base + hit.slide * slab.offset(k), dir: hit.ray.dir };
        let rad = match intersect_plane(&ray, &scene.background) {
            Some(h) => scene.background.radiance(h.u, h.v),
            None => {
                if k == 0 {
                    tally.misses += 1;
                }
                continue;
            }
        };
        for c in 0..3 {
            acc[c] += w[c] * rad[c];
        }
    }
    tally.lookups += 1;
    acc
}

/// Stratified `(u1, u2)` on a `sqrt(spp)` grid when `spp` is a perfect
/// square, plain hashed uniforms otherwise.
#[inline]
fn sample_uv(seed: u64, pixel: u64, sample: u32, strata: Option<u32>) -> (f64, f64) {
    let bits = rng::derive2(seed, pixel, sample as u64);
    let a = rng::to_unit(bits);
    let b = rng::to_unit(rng::mix64(bits ^ 0x5851_f42d_4c95_7f2d));
    match strata {
        Some(n) => {
            let (i, j) = (sample / n, sample % n);
            let inv = 1.0 / n as f64;
            let cap = 1.0 - f64::EPSILON;
            (((i as f64 + a) * inv).min(cap), ((j as f64 + b) * inv).min(cap))
        }
        None => (a, b),
    }
}

fn perfect_square_root(spp: u32) -> Option<u32> {
    let r = (spp as f64).sqrt().round() as u32;
    (r > 1 && r * r == spp).then_some(r)
}

#[allow(clippy::too_many_arguments)]
fn reflected_radiance(
    scene: &Scene,
    m: &GlassMaterial,
    settings: &RenderSettings,
    hit: &GlassHit,
    slab: &SlabResponse,
    pixel: u64,
    weights: &[[f64; 3]],
    tally: &mut Tally,
) -> [f64; 3] {
    let n = scene.glass.normal;
    let rough = m.roughness > 0.0;
    let spp = if rough { settings.spp } else { 1 };
    let strata = perfect_square_root(spp);
    let frame = tangent_frame(n);
    let total_weight = weights.iter().fold([0.0; 3], |mut acc, w| {
        for c in 0..3 {
            acc[c] += w[c];
        }
        acc
    });

    let mut acc = [0.0; 3];
    for s in 0..spp {
        let mut dir = hit.ray.dir.reflect(n);
        if rough {
            let (u1, u2) = sample_uv(settings.seed, pixel, s, strata);
            let ml = ggx_sample(m.roughness, u1, u2);
            let micro = (frame.0 * ml.x + frame.1 * ml.y + n * ml.z).normalized();
            let candidate = hit.ray.dir.reflect(micro);
            if candidate.dot(n) > 0.0 {
                dir = candidate;
            }
        }
        tally.lookups += 1;
        match &scene.reflection {
            // All ghost copies of a distant source arrive from one direction.
            ReflectionSource::Envmap(env) => {
                let rad = env.sample_unchecked(scene.to_world(dir));
                for c in 0..3 {
                    acc[c] += total_weight[c] * rad[c];
                }
            }
            ReflectionSource::Plane(plane) => {
                for (k, w) in weights.iter().enumerate() {
                    if *w == [0.0; 3] {
                        continue;
                    }
                    let ray = Ray { origin: hit.point + hit.slide * slab.offset(k), dir };
                    match intersect_plane(&ray, plane) {
                        Some(h) => {
                            let rad = plane.radiance(h.u, h.v);
                            for c in 0..3 {
                                acc[c] += w[c] * rad[c];
                            }
                        }
                        None if k == 0 => tally.misses += 1,
                        None => {}
                    }
                }
            }
        }
    }
    let inv = 1.0 / spp as f64;
    acc.map(|v| v * inv)
}

struct Row {
    blended: Vec<f32>,
    transmission: Vec<f32>,
    reflection: Vec<f32>,
    tally: Tally,
}

fn render_row(scene: &Scene, m: &GlassMaterial, gt: &GlassMaterial, settings: &RenderSettings, y: usize) -> Row {
    let w = scene.camera.width;
    let mut row = Row {
        blended: Vec::with_capacity(w * 3),
        transmission: Vec::with_capacity(w * 3),
        reflection: Vec::with_capacity(w * 3),
        tally: Tally::default(),
    };
    let gt_settings = RenderSettings { spp: 1, ..settings.clone() };
    let mut weights = Vec::with_capacity(settings.max_order + 1);
    for x in 0..w {
        let ray = scene.camera_ray_unchecked(x as f64 + 0.5, y as f64 + 0.5);
        let pixel = (y * w + x) as u64;
        let Some(hit) = glass_hit(scene, ray) else {
            // Unreachable for a solved scene; treat as a miss.
            row.tally.lookups += 1;
            row.tally.misses += 1;
            row.blended.extend_from_slice(&[0.0; 3]);
            row.transmission.extend_from_slice(&[0.0; 3]);
            row.reflection.extend_from_slice(&[0.0; 3]);
            continue;
        };

        let slab = SlabResponse::new(hit.cos_i, m);
        let trans = transmitted_radiance(scene, m, settings, &hit, &slab, &mut row.tally);
        weights.clear();
        weights.extend((0..=settings.max_order).map(|k| slab.reflected(k)));
        let refl = if weights.iter().all(|w| *w == [0.0; 3]) {
            [0.0; 3]
        } else {
            reflected_radiance(scene, m, settings, &hit, &slab, pixel, &weights, &mut row.tally)
        };

        let gt_slab = SlabResponse::new(hit.cos_i, gt);
        let mut scratch = Tally::default();
        let gt_trans = transmitted_radiance(scene, gt, &gt_settings, &hit, &gt_slab, &mut scratch);

        for c in 0..3 {
            row.blended.push((trans[c] + refl[c]) as f32);
            row.reflection.push(refl[c] as f32);
            row.transmission.push(gt_trans[c] as f32);
        }
    }
    row
}

/// Render B, T and R for one scene and material.
pub fn render_triple(
    scene: &Scene,
    material: &GlassMaterial,
    settings: &RenderSettings,
) -> Result<RenderTriple, RenderError> {
    material.validate()?;
    if settings.spp == 0 {
        return Err(RenderError::ZeroSpp);
    }
    let gt = material.ground_truth();
    let (w, h) = (scene.camera.width, scene.camera.height);
    let rows: Vec<Row> = (0..h)
        .into_par_iter()
        .map(|y| render_row(scene, material, &gt, settings, y))
        .collect();

    let mut blended = Vec::with_capacity(w * h * 3);
    let mut transmission = Vec::with_capacity(w * h * 3);
    let mut reflection = Vec::with_capacity(w * h * 3);
    let mut tally = Tally::default();
    for row in rows {
        blended.extend_from_slice(&row.blended);
        transmission.extend_from_slice(&row.transmission);
        reflection.extend_from_slice(&row.reflection);
        tally.add(row.tally);
    }
    let miss_fraction =
        if tally.lookups == 0 { 0.0 } else { tally.misses as f64 / tally.lookups as f64 };
    if miss_fraction > settings.miss_threshold {
        return Err(RenderError::Coverage { miss_fraction, threshold: settings.miss_threshold });
    }
    let max_shift_px = match settings.refraction_mode {
        RefractionMode::Aligned => 0.0,
        RefractionMode::Exact => validate_alignment(scene, material),
    };
    Ok(RenderTriple {
        blended: LinearImage::new(w, h, blended)?,
        transmission: LinearImage::new(w, h, transmission)?,
        reflection: LinearImage::new(w, h, reflection)?,
        miss_fraction,
        max_shift_px,
    })
}

/// Image-space shift (pixels) of the background point seen through `(px, py)`
/// when the transmitted ray carries the exact slab displacement.
pub fn shift_px_at(scene: &Scene, material: &GlassMaterial, px: f64, py: f64) -> f64 {
    if material.thickness == 0.0 || material.ior == 1.0 {
        return 0.0;
    }
    let ray = scene.camera_ray_unchecked(px, py);
    let Some(hit) = glass_hit(scene, ray) else {
        return 0.0;
    };
    let slab = SlabResponse::new(hit.cos_i, material);
    let origin = transmitted_origin(&hit, scene, material, RefractionMode::Exact, slab.cos_t);
    let shifted = Ray { origin, dir: ray.dir };
    let bg = &scene.background;
    let (Some(t0), Some(t1)) = (
        intersect_infinite(&ray, bg.center, bg.normal),
        intersect_infinite(&shifted, bg.center, bg.normal),
    ) else {
        return 0.0;
    };
    let (x0, y0) = scene.camera.project(ray.at(t0));
    let (x1, y1) = scene.camera.project(shifted.at(t1));
    ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt()
}

/// Largest exact-mode transmitted shift over the image corners and center.
pub fn validate_alignment(scene: &Scene, material: &GlassMaterial) -> f64 {
    let (w, h) = (scene.camera.width as f64, scene.camera.height as f64);
    [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h), (0.5 * w, 0.5 * h)]
        .into_iter()
        .map(|(x, y)| shift_px_at(scene, material, x, y))
        .fold(0.0, f64::max)
}
