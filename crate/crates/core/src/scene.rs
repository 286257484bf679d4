//! The fixed capture rig: pinhole camera, glass plate, textured background
//! plane and a reflection source behind the camera.
//!
//! Everything is built in the camera frame (camera at the origin looking down
//! `-z`, `+y` up). The optional rig pitch only affects which part of an
//! environment map is seen. Plane extents are solved from the camera frustum
//! (and its mirror image in the glass) so every camera ray lands on texture.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imagecore::{EnvMap, ImageError, LinearImage};
use crate::math::Vec3;

/// Plane extents are the exact frustum footprint scaled by this factor.
pub const COVERAGE_MARGIN: f64 = 1.05;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("image size must be at least 1x1, got {0}x{1}")]
    ImageSize(usize, usize),
    #[error("fov_x must be in (10, 120) degrees, got {0}")]
    Fov(f64),
    #[error("glass distance must be > 0 meters, got {0}")]
    GlassDistance(f64),
    #[error("background distance must be > 0 meters, got {0}")]
    BackgroundDistance(f64),
    #[error("reflection plane distance must be > 0 meters, got {0}")]
    ReflectionDistance(f64),
    #[error("{corner} corner of the frustum is not covered by the {target}")]
    Uncovered { corner: Corner, target: &'static str },
    #[error("reflection plane blocks the camera view at the {corner} corner")]
    Occluded { corner: Corner },
    #[error("pixel ({px}, {py}) outside the {width}x{height} image")]
    PixelOutOfRange { px: f64, py: f64, width: usize, height: usize },
    #[error("reflection mode {mode:?} needs a {needs} source image")]
    SourceMismatch { mode: ReflectionMode, needs: &'static str },
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corner {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

impl Corner {
    pub const ALL: [Corner; 4] =
        [Corner::TopLeft, Corner::TopRight, Corner::BottomLeft, Corner::BottomRight];

    /// Continuous image coordinates of the corner.
    fn image_coords(self, width: usize, height: usize) -> (f64, f64) {
        let (w, h) = (width as f64, height as f64);
        match self {
            Corner::TopLeft => (0.0, 0.0),
            Corner::TopRight => (w, 0.0),
            Corner::BottomLeft => (0.0, h),
            Corner::BottomRight => (w, h),
        }
    }
}

impl fmt::Display for Corner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Corner::TopLeft => "top-left",
            Corner::TopRight => "top-right",
            Corner::BottomLeft => "bottom-left",
            Corner::BottomRight => "bottom-right",
        })
    }
}

// --- configuration -------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub width: usize,
    pub height: usize,
    /// Horizontal field of view, degrees.
    pub fov_x: f64,
    /// Pitch of the whole rig relative to the environment map, degrees.
    pub tilt: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self { width: 256, height: 256, fov_x: 60.0, tilt: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlassConfig {
    pub distance_m: f64,
    /// Rotation of the plate about the camera up axis, degrees.
    pub tilt_deg: f64,
}

impl Default for GlassConfig {
    fn default() -> Self {
        Self { distance_m: 0.5, tilt_deg: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundConfig {
    pub distance_m: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
}

impl Default for BackgroundConfig {
    fn default() -> Self {
        Self { distance_m: 2.0, image: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReflectionMode {
    Envmap,
    Plane,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReflectionConfig {
    pub mode: ReflectionMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    /// Plane mode: distance from the glass along the mirrored principal ray.
    pub distance_m: f64,
    pub exposure: f64,
}

impl Default for ReflectionConfig {
    fn default() -> Self {
        Self { mode: ReflectionMode::Envmap, image: None, distance_m: 1.0, exposure: 1.0 }
    }
}

/// Scene description as stored in JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub camera: CameraConfig,
    pub glass: GlassConfig,
    pub background: BackgroundConfig,
    pub reflection: ReflectionConfig,
}

// --- solved scene --------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
}

impl Ray {
    #[inline]
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.dir * t
    }
}

/// Pinhole camera at the origin looking down `-z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub width: usize,
    pub height: usize,
    pub fov_x: f64,
    pub position: Vec3,
    pub forward: Vec3,
    pub up: Vec3,
    pub right: Vec3,
    tan_half_x: f64,
    tan_half_y: f64,
}

impl Camera {
    pub fn new(width: usize, height: usize, fov_x: f64) -> Result<Self, SceneError> {
        if width == 0 || height == 0 {
            return Err(SceneError::ImageSize(width, height));
        }
        if !(fov_x > 10.0 && fov_x < 120.0) {
            return Err(SceneError::Fov(fov_x));
        }
        let tan_half_x = (fov_x.to_radians() * 0.5).tan();
        let tan_half_y = tan_half_x * height as f64 / width as f64;
        Ok(Self {
            width,
            height,
            fov_x,
            position: Vec3::ZERO,
            forward: -Vec3::Z,
            up: Vec3::Y,
            right: Vec3::X,
            tan_half_x,
            tan_half_y,
        })
    }

    pub fn tan_half_x(&self) -> f64 {
        self.tan_half_x
    }

    pub fn tan_half_y(&self) -> f64 {
        self.tan_half_y
    }

    /// Focal length in pixels.
    pub fn focal_px(&self) -> f64 {
        self.width as f64 * 0.5 / self.tan_half_x
    }

    /// Unit direction through continuous image coordinates `(px, py)`.
    #[inline]
    pub fn direction(&self, px: f64, py: f64) -> Vec3 {
        let sx = (2.0 * px / self.width as f64 - 1.0) * self.tan_half_x;
        let sy = (1.0 - 2.0 * py / self.height as f64) * self.tan_half_y;
        (self.forward + self.right * sx + self.up * sy).normalized()
    }

    /// Continuous image coordinates of a camera-frame point in front of the
    /// camera.
    pub fn project(&self, p: Vec3) -> (f64, f64) {
        let depth = p.dot(self.forward);
        let sx = p.dot(self.right) / depth / self.tan_half_x;
        let sy = p.dot(self.up) / depth / self.tan_half_y;
        ((sx + 1.0) * 0.5 * self.width as f64, (1.0 - sy) * 0.5 * self.height as f64)
    }
}

/// A finite textured rectangle. `axis_v` points toward increasing texture
/// rows, so `(u, v) = (0, 0)` is the top-left texel.
#[derive(Debug, Clone)]
pub struct PlaneTarget {
    pub center: Vec3,
    pub normal: Vec3,
    pub axis_u: Vec3,
    pub axis_v: Vec3,
    pub half_extent_u: f64,
    pub half_extent_v: f64,
    pub texture: LinearImage,
    /// Radiance multiplier applied on lookup.
    pub exposure: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneHit {
    pub t: f64,
    pub u: f64,
    pub v: f64,
}

impl PlaneTarget {
    #[inline]
    pub fn radiance(&self, u: f64, v: f64) -> [f64; 3] {
        let (w, h) = self.texture.dimensions();
        let rgb = self.texture.sample_bilinear_clamped(u * w as f64, v * h as f64);
        rgb.map(|c| c * self.exposure)
    }
}

/// Ray / finite-plane intersection. Planes are two-sided.
#[inline]
pub fn intersect_plane(ray: &Ray, plane: &PlaneTarget) -> Option<PlaneHit> {
    let denom = ray.dir.dot(plane.normal);
    if denom.abs() < 1e-12 {
        return None;
    }
    let t = (plane.center - ray.origin).dot(plane.normal) / denom;
    if !(t > 1e-9) {
        return None;
    }
    let local = ray.at(t) - plane.center;
    let a = local.dot(plane.axis_u);
    let b = local.dot(plane.axis_v);
    if a.abs() > plane.half_extent_u || b.abs() > plane.half_extent_v {
        return None;
    }
    Some(PlaneHit {
        t,
        u: 0.5 + a / (2.0 * plane.half_extent_u),
        v: 0.5 + b / (2.0 * plane.half_extent_v),
    })
}

/// Infinite plane through `point` with unit `normal`; returns the ray
/// parameter of the hit.
#[inline]
pub fn intersect_infinite(ray: &Ray, point: Vec3, normal: Vec3) -> Option<f64> {
    let denom = ray.dir.dot(normal);
    if denom.abs() < 1e-12 {
        return None;
    }
    let t = (point - ray.origin).dot(normal) / denom;
    (t > 1e-9).then_some(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlassPose {
    pub distance_m: f64,
    pub tilt_deg: f64,
    /// Point on the front surface (hit of the principal ray).
    pub point: Vec3,
    /// Unit front-surface normal, facing the camera.
    pub normal: Vec3,
}

impl GlassPose {
    /// Hit of `ray` on the front surface.
    #[inline]
    pub fn hit(&self, ray: &Ray) -> Option<f64> {
        intersect_infinite(ray, self.point, self.normal)
    }
}

#[derive(Debug, Clone)]
pub enum ReflectionSource {
    Envmap(EnvMap),
    Plane(PlaneTarget),
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub camera: Camera,
    pub glass: GlassPose,
    pub background: PlaneTarget,
    pub reflection: ReflectionSource,
    /// Rig pitch relative to the environment map, radians.
    pub rig_pitch: f64,
}

impl Scene {
    /// Rotate a camera-frame direction into the environment map frame.
    #[inline]
    pub fn to_world(&self, dir: Vec3) -> Vec3 {
        if self.rig_pitch == 0.0 {
            dir
        } else {
            dir.rotate_x(self.rig_pitch)
        }
    }

    /// Camera ray through `(px, py)`, where pixel `i` spans `[i, i + 1)`.
    pub fn camera_ray(&self, px: f64, py: f64) -> Result<Ray, SceneError> {
        let (w, h) = (self.camera.width, self.camera.height);
        if !(px >= 0.0 && px < w as f64 && py >= 0.0 && py < h as f64) {
            return Err(SceneError::PixelOutOfRange { px, py, width: w, height: h });
        }
        Ok(self.camera_ray_unchecked(px, py))
    }

    #[inline]
    pub fn camera_ray_unchecked(&self, px: f64, py: f64) -> Ray {
        Ray { origin: self.camera.position, dir: self.camera.direction(px, py) }
    }
}

/// Solve plane placement and extents from the config, then audit frustum
/// coverage at the four image corners.
///
/// `reflection_image` is an equirectangular map in envmap mode and a planar
/// texture in plane mode.
pub fn solve_geometry(
    config: &SceneConfig,
    background_image: LinearImage,
    reflection_image: LinearImage,
) -> Result<Scene, SceneError> {
    let camera = Camera::new(config.camera.width, config.camera.height, config.camera.fov_x)?;
    let d = config.glass.distance_m;
    if !(d > 0.0 && d.is_finite()) {
        return Err(SceneError::GlassDistance(d));
    }
    let bg = config.background.distance_m;
    if !(bg > 0.0 && bg.is_finite()) {
        return Err(SceneError::BackgroundDistance(bg));
    }

    let tilt = config.glass.tilt_deg.to_radians();
    let glass = GlassPose {
        distance_m: d,
        tilt_deg: config.glass.tilt_deg,
        point: camera.forward * d,
        normal: Vec3::Z.rotate_y(tilt),
    };

    let background = PlaneTarget {
        center: camera.forward * bg,
        normal: -camera.forward,
        axis_u: camera.right,
        axis_v: -camera.up,
        half_extent_u: bg * camera.tan_half_x * COVERAGE_MARGIN,
        half_extent_v: bg * camera.tan_half_y * COVERAGE_MARGIN,
        texture: background_image,
        exposure: 1.0,
    };

    let exposure = config.reflection.exposure;
    let reflection = match config.reflection.mode {
        ReflectionMode::Envmap => ReflectionSource::Envmap(EnvMap::new(reflection_image, exposure)?),
        ReflectionMode::Plane => {
            let s = config.reflection.distance_m;
            if !(s > 0.0 && s.is_finite()) {
                return Err(SceneError::ReflectionDistance(s));
            }
            if !(exposure > 0.0 && exposure.is_finite()) {
                return Err(ImageError::BadExposure(exposure).into());
            }
            // The mirror image of the camera sits `d` behind the glass along
            // the reflected principal ray, so the plane is `d + s` away from it.
            let mirrored_forward = camera.forward.reflect(glass.normal);
            let reach = d + s;
            ReflectionSource::Plane(PlaneTarget {
                center: glass.point + mirrored_forward * s,
                normal: -mirrored_forward,
                axis_u: camera.right.reflect(glass.normal),
                axis_v: -camera.up.reflect(glass.normal),
                half_extent_u: reach * camera.tan_half_x * COVERAGE_MARGIN,
                half_extent_v: reach * camera.tan_half_y * COVERAGE_MARGIN,
                texture: reflection_image,
                exposure,
            })
        }
    };

    let scene = Scene {
        camera,
        glass,
        background,
        reflection,
        rig_pitch: config.camera.tilt.to_radians(),
    };
    audit_coverage(&scene)?;
    Ok(scene)
}

fn audit_coverage(scene: &Scene) -> Result<(), SceneError> {
    let cam = &scene.camera;
    for corner in Corner::ALL {
        let (px, py) = corner.image_coords(cam.width, cam.height);
        let ray = scene.camera_ray_unchecked(px, py);
        let t_glass = scene
            .glass
            .hit(&ray)
            .ok_or(SceneError::Uncovered { corner, target: "glass plate" })?;
        match intersect_plane(&ray, &scene.background) {
            Some(hit) if hit.t > t_glass => {}
            _ => return Err(SceneError::Uncovered { corner, target: "background plane" }),
        }
        if let ReflectionSource::Plane(plane) = &scene.reflection {
            if let Some(hit) = intersect_plane(&ray, plane) {
                if hit.t < t_glass {
                    return Err(SceneError::Occluded { corner });
                }
            }
            let reflected = Ray { origin: ray.at(t_glass), dir: ray.dir.reflect(scene.glass.normal) };
            if intersect_plane(&reflected, plane).is_none() {
                return Err(SceneError::Uncovered { corner, target: "reflection plane" });
            }
        }
    }
    Ok(())
}
