//! Fixtures shared by the benchmarks.

use glassforge::imagecore::{LinearImage, SrgbImage};
use glassforge::scene::{CameraConfig, ReflectionConfig, ReflectionMode, SceneConfig};
use glassforge::{solve_geometry, Scene};

/// Smooth procedural texture with some high-frequency detail.
pub fn texture(w: usize, h: usize, seed: u32) -> LinearImage {
    let s = seed as f32;
    LinearImage::from_fn(w, h, |x, y| {
        let (fx, fy) = (x as f32 / w as f32, y as f32 / h as f32);
        let checker = ((x / 8 + y / 8) % 2) as f32 * 0.2;
        [0.3 + 0.5 * fx + checker, 0.2 + 0.6 * fy, 0.4 + 0.3 * ((fx + fy + s) * 9.0).sin()]
    })
}

/// A square camera looking through untilted glass at a textured wall, with a
/// planar reflection source.
pub fn scene(size: usize) -> Scene {
    let config = SceneConfig {
        camera: CameraConfig { width: size, height: size, ..Default::default() },
        reflection: ReflectionConfig { mode: ReflectionMode::Plane, ..Default::default() },
        ..Default::default()
    };
    solve_geometry(&config, texture(512, 512, 0), texture(512, 512, 1)).expect("bench scene is valid")
}

/// Pseudo-random 8-bit image.
pub fn noise_srgb(w: usize, h: usize, seed: u64) -> SrgbImage {
    let mut rng = glassforge::rng::SplitMix64::new(seed);
    SrgbImage::new(w, h, (0..w * h * 3).map(|_| rng.below(256) as u8).collect()).expect("length matches")
}
