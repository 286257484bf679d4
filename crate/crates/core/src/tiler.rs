//! Overlapping tile planning, extraction and linear-ramp stitching.
//!
//! Images whose shorter side is below the tile size are first upsampled
//! (aspect preserved) so that every axis holds at least one full tile. Tiles
//! are cut from that working image and stitched back with separable linear
//! ramps across each overlap band, normalized to a partition of unity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imagecore::{resample_lanczos, ImageError, LinearImage};

pub const DEFAULT_TILE_SIZE: usize = 608;
pub const DEFAULT_MIN_OVERLAP: usize = 96;

#[derive(Debug, Error)]
pub enum TileError {
    #[error("image size must be nonzero")]
    ZeroSize,
    #[error("min_overlap {min_overlap} must be smaller than tile_size {tile_size}")]
    BadOverlap { tile_size: usize, min_overlap: usize },
    #[error("image is {got_w}x{got_h} but the plan expects {want_w}x{want_h}")]
    SizeMismatch { got_w: usize, got_h: usize, want_w: usize, want_h: usize },
    #[error("plan has {expected} tiles, got {got}")]
    CountMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlendProfile {
    /// Weight falls linearly from 1 to 0 across each overlap band.
    #[default]
    Linear,
}

/// Tiling along one axis of the working image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxisPlan {
    pub length: usize,
    pub origins: Vec<usize>,
    /// Ramp widths `[leading, trailing]` per tile; zero at the image border.
    pub ramps: Vec<[usize; 2]>,
}

impl AxisPlan {
    fn new(length: usize, tile: usize, min_overlap: usize) -> Self {
        let origins: Vec<usize> = if length <= tile {
            vec![0]
        } else {
            let span = length - tile;
            let n = span.div_ceil(tile - min_overlap) + 1;
            (0..n).map(|i| ((i * span) as f64 / (n - 1) as f64).round() as usize).collect()
        };
        let ramps = (0..origins.len())
            .map(|i| {
                let lead = if i > 0 { origins[i - 1] + tile - origins[i] } else { 0 };
                let trail = if i + 1 < origins.len() { origins[i] + tile - origins[i + 1] } else { 0 };
                [lead, trail]
            })
            .collect();
        Self { length: length.max(tile), origins, ramps }
    }

    fn raw_weight(&self, tile_index: usize, tile: usize, pos: usize) -> f64 {
        let start = self.origins[tile_index];
        if pos < start || pos >= start + tile {
            return 0.0;
        }
        let [lead, trail] = self.ramps[tile_index];
        let mut w: f64 = 1.0;
        if lead > 0 {
            w = w.min(((pos - start) as f64 + 0.5) / lead as f64);
        }
        if trail > 0 {
            w = w.min(((start + tile - pos) as f64 - 0.5) / trail as f64);
        }
        w
    }

    /// Per-tile weights over the tile's extent, normalized across tiles.
    fn normalized_weights(&self, tile: usize) -> Vec<Vec<f64>> {
        let mut sums = vec![0.0; self.length];
        for t in 0..self.origins.len() {
            for (p, s) in sums.iter_mut().enumerate().skip(self.origins[t]).take(tile) {
                *s += self.raw_weight(t, tile, p);
            }
        }
        (0..self.origins.len())
            .map(|t| {
                let o = self.origins[t];
                (0..tile).map(|i| self.raw_weight(t, tile, o + i) / sums[o + i]).collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TilePlan {
    pub tile_size: usize,
    pub min_overlap: usize,
    pub source_size: [usize; 2],
    pub working_size: [usize; 2],
    pub profile: BlendProfile,
    pub x: AxisPlan,
    pub y: AxisPlan,
}

/// Location of one tile in the working image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileRect {
    pub index: usize,
    pub x: usize,
    pub y: usize,
}

pub fn plan_tiles(width: usize, height: usize, tile_size: usize, min_overlap: usize) -> Result<TilePlan, TileError> {
    if width == 0 || height == 0 || tile_size == 0 {
        return Err(TileError::ZeroSize);
    }
    if min_overlap >= tile_size {
        return Err(TileError::BadOverlap { tile_size, min_overlap });
    }
    let short = width.min(height);
    let (ww, wh) = if short < tile_size {
        let scale = tile_size as f64 / short as f64;
        let up = |l: usize| if l == short { tile_size } else { ((l as f64 * scale).round() as usize).max(tile_size) };
        (up(width), up(height))
    } else {
        (width, height)
    };
    Ok(TilePlan {
        tile_size,
        min_overlap,
        source_size: [width, height],
        working_size: [ww, wh],
        profile: BlendProfile::Linear,
        x: AxisPlan::new(ww, tile_size, min_overlap),
        y: AxisPlan::new(wh, tile_size, min_overlap),
    })
}

impl TilePlan {
    pub fn with_defaults(width: usize, height: usize) -> Result<Self, TileError> {
        plan_tiles(width, height, DEFAULT_TILE_SIZE, DEFAULT_MIN_OVERLAP)
    }

    pub fn tile_count(&self) -> usize {
        self.x.origins.len() * self.y.origins.len()
    }

    pub fn resamples(&self) -> bool {
        self.source_size != self.working_size
    }

    /// Tiles in row-major order.
    pub fn tiles(&self) -> Vec<TileRect> {
        let mut out = Vec::with_capacity(self.tile_count());
        for &y in &self.y.origins {
            for &x in &self.x.origins {
                out.push(TileRect { index: out.len(), x, y });
            }
        }
        out
    }

    /// Summed stitch weight at every working pixel; 1 everywhere by
    /// construction.
    pub fn weight_sum_map(&self) -> Vec<f64> {
        let [w, h] = self.working_size;
        let mut acc = vec![0.0; w * h];
        self.accumulate(|_, _, _| 1.0, |i, wt, _| acc[i] += wt);
        acc
    }

    fn accumulate(&self, mut value: impl FnMut(usize, usize, usize) -> f64, mut sink: impl FnMut(usize, f64, f64)) {
        let t = self.tile_size;
        let wx = self.x.normalized_weights(t);
        let wy = self.y.normalized_weights(t);
        let w = self.working_size[0];
        let nx = self.x.origins.len();
        for rect in self.tiles() {
            let (ix, iy) = (rect.index % nx, rect.index / nx);
            for ty in 0..t {
                let row = (rect.y + ty) * w + rect.x;
                for tx in 0..t {
                    let wt = wx[ix][tx] * wy[iy][ty];
                    sink(row + tx, wt, value(rect.index, tx, ty));
                }
            }
        }
    }
}

pub fn split(img: &LinearImage, plan: &TilePlan) -> Result<Vec<LinearImage>, TileError> {
    let (w, h) = img.dimensions();
    let [sw, sh] = plan.source_size;
    if (w, h) != (sw, sh) {
        return Err(TileError::SizeMismatch { got_w: w, got_h: h, want_w: sw, want_h: sh });
    }
    let resampled;
    let working = if plan.resamples() {
        resampled = resample_lanczos(img, plan.working_size[0], plan.working_size[1])?;
        &resampled
    } else {
        img
    };
    let t = plan.tile_size;
    Ok(plan.tiles().iter().map(|r| working.crop(r.x, r.y, t, t)).collect())
}

pub fn stitch(tiles: &[LinearImage], plan: &TilePlan) -> Result<LinearImage, TileError> {
    if tiles.len() != plan.tile_count() {
        return Err(TileError::CountMismatch { expected: plan.tile_count(), got: tiles.len() });
    }
    let t = plan.tile_size;
    if let Some(bad) = tiles.iter().find(|tile| tile.dimensions() != (t, t)) {
        let (got_w, got_h) = bad.dimensions();
        return Err(TileError::SizeMismatch { got_w, got_h, want_w: t, want_h: t });
    }
    let [w, h] = plan.working_size;
    let mut acc = vec![[0.0f64; 3]; w * h];
    for c in 0..3 {
        plan.accumulate(
            |i, tx, ty| tiles[i].data()[(ty * t + tx) * 3 + c] as f64,
            |p, wt, v| acc[p][c] += wt * v,
        );
    }
    let data = acc.into_iter().flat_map(|p| p.map(|v| v as f32)).collect();
    let working = LinearImage::new(w, h, data)?;
    if plan.resamples() {
        Ok(resample_lanczos(&working, plan.source_size[0], plan.source_size[1])?)
    } else {
        Ok(working)
    }
}
