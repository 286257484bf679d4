use std::f64::consts::PI;

use rayon::prelude::*;

use super::{ImageError, LinearImage};

const LOBES: f64 = 3.0;

#[inline]
fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

#[inline]
pub(crate) fn lanczos3(x: f64) -> f64 {
    if x.abs() >= LOBES {
        0.0
    } else {
        sinc(x) * sinc(x / LOBES)
    }
}

/// Per-output-sample taps along one axis.
struct AxisTaps {
    /// `(first_source_index, weights)` per output index; indices are already
    /// clamped, so `first + k` is clamped separately per tap.
    taps: Vec<Vec<(usize, f64)>>,
}

impl AxisTaps {
    fn new(src: usize, dst: usize) -> Self {
        let ratio = src as f64 / dst as f64;
        // Widen the kernel when minifying so it also acts as a low-pass.
        let filter_scale = ratio.max(1.0);
        let support = LOBES * filter_scale;
        let last = (src - 1) as isize;
        let taps = (0..dst)
            .map(|i| {
                let center = (i as f64 + 0.5) * ratio - 0.5;
                let lo = (center - support).floor() as isize;
                let hi = (center + support).ceil() as isize;
                let mut row: Vec<(usize, f64)> = Vec::with_capacity((hi - lo + 1) as usize);
                let mut sum = 0.0;
                for j in lo..=hi {
                    let w = lanczos3((j as f64 - center) / filter_scale);
                    if w == 0.0 {
                        continue;
                    }
                    let idx = j.clamp(0, last) as usize;
                    sum += w;
                    match row.last_mut() {
                        Some((k, acc)) if *k == idx => *acc += w,
                        _ => row.push((idx, w)),
                    }
                }
                for (_, w) in row.iter_mut() {
                    *w /= sum;
                }
                row
            })
            .collect();
        Self { taps }
    }
}

/// Separable Lanczos-3 resampling with clamp-to-edge borders and per-pixel
/// weight normalization.
pub fn resample_lanczos(
    img: &LinearImage,
    new_width: usize,
    new_height: usize,
) -> Result<LinearImage, ImageError> {
    if new_width == 0 || new_height == 0 {
        return Err(ImageError::ZeroSize { width: new_width, height: new_height });
    }
    let (w, h) = img.dimensions();
    if w == 0 || h == 0 {
        return Err(ImageError::ZeroSize { width: w, height: h });
    }
    if (w, h) == (new_width, new_height) {
        return Ok(img.clone());
    }

    let src = img.data();
    let xt = AxisTaps::new(w, new_width);
    let mut horiz = vec![0.0f32; new_width * h * 3];
    horiz
        .par_chunks_mut(new_width * 3)
        .enumerate()
        .for_each(|(y, out)| {
            let row = &src[y * w * 3..(y + 1) * w * 3];
            for (x, taps) in xt.taps.iter().enumerate() {
                let mut acc = [0.0f64; 3];
                for &(j, wt) in taps {
                    for c in 0..3 {
                        acc[c] += row[j * 3 + c] as f64 * wt;
                    }
                }
                for c in 0..3 {
                    out[x * 3 + c] = acc[c] as f32;
                }
            }
        });

    let yt = AxisTaps::new(h, new_height);
    let mut out = vec![0.0f32; new_width * new_height * 3];
    let stride = new_width * 3;
    out.par_chunks_mut(stride).enumerate().for_each(|(y, dst)| {
        let taps = &yt.taps[y];
        let mut acc = vec![0.0f64; stride];
        for &(j, wt) in taps {
            let row = &horiz[j * stride..(j + 1) * stride];
            for (a, &v) in acc.iter_mut().zip(row) {
                *a += v as f64 * wt;
            }
        }
        for (d, a) in dst.iter_mut().zip(acc) {
            *d = a as f32;
        }
    });
    Ok(LinearImage::from_raw_unchecked(new_width, new_height, out))
}
