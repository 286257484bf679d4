//! Physically based synthesis of pixel-aligned glass-reflection triplets.
//!
//! The pipeline renders a transmission scene through a thick glass plate that
//! reflects either an equirectangular environment map or a planar image,
//! producing the blended observation `B`, the reflection-free transmission
//! `T` and the reflection layer `R`. Alongside the renderer the crate carries
//! the screen-space alpha-blending baseline, an overlapping-tile splitter and
//! stitcher, 8-bit image quality metrics, and a deterministic dataset
//! generator.

pub mod alphablend;
pub mod dataset;
pub mod imagecore;
pub mod math;
pub mod metrics;
pub mod optics;
pub mod renderer;
pub mod rng;
pub mod scene;
pub mod tiler;

pub use imagecore::{EnvMap, LinearImage, SrgbImage};
pub use optics::GlassMaterial;
pub use renderer::{render_triple, RefractionMode, RenderSettings, RenderTriple};
pub use scene::{solve_geometry, Scene, SceneConfig};
