use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::optics::GlassMaterial;
use crate::rng::SplitMix64;

/// Uniform sampling intervals, each `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamRanges {
    pub ior: [f64; 2],
    pub roughness: [f64; 2],
    /// Meters.
    pub thickness: [f64; 2],
    pub metallic: [f64; 2],
    /// Each base color channel is uniform in `[base_color_min, 1]`.
    pub base_color_min: f64,
    /// Source exposure offset in stops around the gray-world anchor.
    pub exposure_log2: [f64; 2],
}

impl Default for ParamRanges {
    fn default() -> Self {
        Self {
            ior: [1.25, 1.75],
            roughness: [0.0, 0.05],
            thickness: [0.0, 0.05],
            metallic: [0.0, 0.1],
            base_color_min: 0.85,
            exposure_log2: [-1.0, 1.0],
        }
    }
}

impl ParamRanges {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let check = |name: &'static str, [lo, hi]: [f64; 2], min: f64, max: f64| {
            if lo.is_finite() && hi.is_finite() && lo <= hi && lo >= min && hi <= max {
                Ok(())
            } else {
                Err(DatasetError::Range { name, lo, hi })
            }
        };
        check("ior", self.ior, 1.0, f64::MAX)?;
        check("roughness", self.roughness, 0.0, 1.0)?;
        check("thickness", self.thickness, 0.0, f64::MAX)?;
        check("metallic", self.metallic, 0.0, 1.0)?;
        check("base_color_min", [self.base_color_min, 1.0], 0.0, 1.0)?;
        check("exposure_log2", self.exposure_log2, -64.0, 64.0)
    }
}

/// Draws ior, roughness, thickness, metallic, then base color r, g, b.
pub fn sample_material(rng: &mut SplitMix64, ranges: &ParamRanges) -> GlassMaterial {
    let u = |rng: &mut SplitMix64, [lo, hi]: [f64; 2]| rng.uniform(lo, hi);
    let ior = u(rng, ranges.ior);
    let roughness = u(rng, ranges.roughness);
    let thickness = u(rng, ranges.thickness);
    let metallic = u(rng, ranges.metallic);
    let base_color = std::array::from_fn(|_| rng.uniform(ranges.base_color_min, 1.0));
    GlassMaterial { ior, roughness, thickness, base_color, metallic }
}
