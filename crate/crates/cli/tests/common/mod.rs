#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use glassforge::imagecore::{save_png, SrgbImage};
use sha2::{Digest, Sha256};

pub fn glassforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glassforge")).args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Flat (non run-length) Radiance file. `f(x, y)` gives RGB in [0, 1] and
/// `e` the shared exponent byte (128 maps the mantissa range to [0, 1)).
pub fn write_rgbe(path: &Path, w: usize, h: usize, f: impl Fn(usize, usize) -> ([f64; 3], u8)) {
    let mut bytes = format!("#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y {h} +X {w}\n").into_bytes();
    for y in 0..h {
        for x in 0..w {
            let (rgb, e) = f(x, y);
            let m = rgb.map(|c| (c.clamp(0.0, 0.999) * 256.0) as u8);
            bytes.extend_from_slice(&[m[0], m[1], m[2], e]);
        }
    }
    std::fs::write(path, bytes).unwrap();
}

/// Smooth sky: bright upper hemisphere, darker ground.
pub fn write_sky(path: &Path, w: usize, h: usize, variant: usize) {
    write_rgbe(path, w, h, |x, y| {
        let u = x as f64 / w as f64;
        let v = y as f64 / h as f64;
        let band = 0.5 + 0.4 * ((u * 6.3 * (variant + 1) as f64).sin());
        ([0.3 + 0.5 * band, 0.5 + 0.3 * v, 0.9 - 0.5 * v], if v < 0.5 { 130 } else { 127 })
    });
}

pub fn write_pattern_png(path: &Path, w: usize, h: usize, k: usize) {
    let data = (0..w * h)
        .flat_map(|i| {
            let (x, y) = (i % w, i / w);
            let check = if (x / 6 + y / 6 + k).is_multiple_of(2) { 60 } else { 0 };
            [((x * 3 + k * 40) % 200 + check) as u8, ((y * 5 + k * 13) % 190 + check) as u8, (((x + y) * 2) % 180 + 30) as u8]
        })
        .collect();
    save_png(&SrgbImage::new(w, h, data).unwrap(), path).unwrap();
}

/// hdr/ with two skies and srgb/ with three patterns.
pub fn write_pools(root: &Path) {
    std::fs::create_dir_all(root.join("hdr")).unwrap();
    std::fs::create_dir_all(root.join("srgb")).unwrap();
    for k in 0..2 {
        write_sky(&root.join(format!("hdr/sky{k}.hdr")), 128, 64, k);
    }
    for k in 0..3 {
        write_pattern_png(&root.join(format!("srgb/img{k}.png")), 96, 72, k);
    }
}

pub fn tree_hashes(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, hex::encode(Sha256::digest(std::fs::read(&p).unwrap())));
            }
        }
    }
    out
}
