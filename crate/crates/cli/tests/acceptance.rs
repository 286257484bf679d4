//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when a required criterion fails.

mod common;

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use glassforge::alphablend::{alpha_blend, blend_value, BlendParams};
use glassforge::dataset::read_manifest;
use glassforge::imagecore::{encode_channel, load_image, LinearImage, SrgbImage};
use glassforge::metrics::{ms_ssim, ms_ssim_weights, psnr, ssim, SsimSettings, SsimWindow};
use glassforge::optics::{fresnel_unpolarized, ghost_series, ghost_totals, refract_cos, GlassMaterial};
use glassforge::renderer::{render_triple, RefractionMode, RenderSettings, RenderTriple};
use glassforge::rng::SplitMix64;
use glassforge::scene::{solve_geometry, ReflectionConfig, ReflectionMode, Scene, SceneConfig};
use glassforge::tiler::{split, stitch, TilePlan};

use common::{glassforge, stdout, tree_hashes, write_pattern_png, write_pools, write_sky};

type Check = Result<String, String>;

/// Name, check, and whether a failure fails the run.
type Criterion = (&'static str, fn() -> Check, bool);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// --- shared helpers ------------------------------------------------------

fn lum(p: &[f32]) -> f64 {
    0.2126 * p[0] as f64 + 0.7152 * p[1] as f64 + 0.0722 * p[2] as f64
}

fn luminance(img: &LinearImage) -> Vec<f64> {
    img.data().chunks(3).map(lum).collect()
}

fn centroid(v: &[f64], w: usize) -> (f64, f64) {
    let (mut sx, mut sy, mut s) = (0.0, 0.0, 0.0);
    for (i, &m) in v.iter().enumerate() {
        sx += m * (i % w) as f64;
        sy += m * (i / w) as f64;
        s += m;
    }
    (sx / s, sy / s)
}

fn mean_abs_laplacian(img: &LinearImage) -> f64 {
    let (w, h) = img.dimensions();
    let l = luminance(img);
    let mut acc = 0.0;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            acc += (l[i - 1] + l[i + 1] + l[i - w] + l[i + w] - 4.0 * l[i]).abs();
        }
    }
    acc / ((w - 2) * (h - 2)) as f64
}

fn checker(w: usize, h: usize, cell: usize) -> LinearImage {
    LinearImage::from_fn(w, h, |x, y| {
        let v = if (x / cell + y / cell).is_multiple_of(2) { 0.9 } else { 0.1 };
        [v, 0.8 * v + 0.1, 1.0 - 0.5 * v]
    })
}

/// Coarse random texture; bilinear lookups turn it into smooth noise.
fn value_noise(w: usize, h: usize, seed: u64) -> LinearImage {
    let mut rng = SplitMix64::new(seed);
    LinearImage::from_fn(w, h, |_, _| {
        let v = rng.uniform(0.05, 0.95) as f32;
        [v, v, v]
    })
}

fn sky(w: usize, h: usize) -> LinearImage {
    LinearImage::from_fn(w, h, |x, y| {
        let u = x as f32 / w as f32;
        let v = y as f32 / h as f32;
        [0.6 + 0.3 * (u * 12.0).sin(), 0.7 - 0.4 * v, 0.9 - 0.5 * v]
    })
}

/// 256 px rig with a planar reflector: narrow field of view, glass turned by
/// 30 degrees at 0.3 m, reflector 0.2 m off the glass.
fn planar_rig(reflection: LinearImage) -> Scene {
    let mut c = SceneConfig::default();
    c.camera.width = 256;
    c.camera.height = 256;
    c.camera.fov_x = 15.0;
    c.glass.distance_m = 0.3;
    c.glass.tilt_deg = 30.0;
    c.background.distance_m = 2.0;
    c.reflection = ReflectionConfig { mode: ReflectionMode::Plane, distance_m: 0.2, ..Default::default() };
    solve_geometry(&c, checker(128, 128, 8), reflection).expect("rig geometry")
}

fn render(scene: &Scene, m: &GlassMaterial, spp: u32, max_order: usize, mode: RefractionMode) -> RenderTriple {
    let settings = RenderSettings { spp, max_order, seed: 11, refraction_mode: mode, ..Default::default() };
    render_triple(scene, m, &settings).expect("render")
}

// --- criteria ------------------------------------------------------------

fn energy_conservation() -> Check {
    let mut worst_closed: f64 = 0.0;
    let mut worst_series: f64 = 0.0;
    for ior in [1.1, 1.5, 1.75] {
        for deg in [0.0f64, 30.0, 60.0] {
            let m = GlassMaterial { ior, ..Default::default() };
            let cos_i = deg.to_radians().cos();
            let (r, t) = ghost_totals(cos_i, &m);
            let s = ghost_series(cos_i, &m, 5);
            let (rs, ts) = (s.total_reflected(), s.total_transmitted());
            for c in 0..3 {
                worst_closed = worst_closed.max((r[c] + t[c] - 1.0).abs());
                worst_series = worst_series.max((rs[c] + ts[c] - 1.0).abs());
            }
        }
    }
    ensure(worst_closed < 1e-9, format!("closed-form deficit {worst_closed:.3e}"))?;
    ensure(worst_series < 1e-6, format!("order-5 deficit {worst_series:.3e}"))?;
    let r = fresnel_unpolarized(1.0, 1.5);
    let (rt, _) = ghost_totals(1.0, &GlassMaterial::default());
    let expect = 2.0 * r / (1.0 + r);
    ensure((rt[0] - expect).abs() < 1e-12, format!("R_tot {} vs {expect}", rt[0]))?;
    ensure((rt[0] - 0.076923).abs() < 5e-7, format!("R_tot {} vs 0.076923", rt[0]))?;
    Ok(format!("closed {worst_closed:.1e}, order-5 {worst_series:.1e}, R_tot(1.5, 0deg) = {:.6}", rt[0]))
}

fn fresnel_anchors() -> Check {
    let r0 = fresnel_unpolarized(1.0, 1.5);
    ensure((r0 - 0.04).abs() < 1e-9, format!("normal incidence {r0}"))?;
    let c = 45f64.to_radians().cos();
    let r45 = fresnel_unpolarized(c, 1.5);
    ensure((r45 - 0.0502).abs() < 1e-4, format!("45 deg {r45}"))?;
    // Independent closed form from s and p amplitudes.
    let ct = refract_cos(c, 1.5);
    let rs = ((c - 1.5 * ct) / (c + 1.5 * ct)).powi(2);
    let rp = ((ct - 1.5 * c) / (ct + 1.5 * c)).powi(2);
    ensure((r45 - 0.5 * (rs + rp)).abs() < 1e-12, "45 deg disagrees with s/p average")?;
    Ok(format!("R(0) = {r0:.9}, R(45) = {r45:.6}"))
}

fn factor_reproduction() -> Check {
    // (a) IoR raises reflection strength.
    let scene = planar_rig(checker(256, 256, 4));
    let means: Vec<f64> = [1.1, 1.3, 1.5, 1.7]
        .iter()
        .map(|&ior| {
            let m = GlassMaterial { ior, roughness: 0.01, ..Default::default() };
            render(&scene, &m, 64, 3, RefractionMode::Aligned).reflection.mean_luminance()
        })
        .collect();
    ensure(means.windows(2).all(|p| p[0] < p[1]), format!("(a) mean R not increasing: {means:?}"))?;

    // (b) Ghost displacement follows 2 d tan(theta_t).
    let spot = LinearImage::from_fn(256, 256, |x, y| {
        let (dx, dy) = (x as f64 - 128.0, y as f64 - 128.0);
        let v = (-(dx * dx + dy * dy) / (2.0 * 8.0 * 8.0)).exp() as f32;
        [v, v, v]
    });
    let rig = planar_rig(spot);
    let cos_i = 30f64.to_radians().cos();
    let cos_t = refract_cos(cos_i, 1.5);
    let tan_t = (1.0 - cos_t * cos_t).sqrt() / cos_t;
    let mut xs = Vec::new();
    let mut gaps = Vec::new();
    for d_mm in [1.0, 2.5, 5.0] {
        let m = GlassMaterial { ior: 1.5, thickness: d_mm * 1e-3, ..Default::default() };
        let full = render(&rig, &m, 64, 3, RefractionMode::Aligned).reflection;
        let primary = render(&rig, &m, 64, 0, RefractionMode::Aligned).reflection;
        let w = rig.camera.width;
        let p = luminance(&primary);
        let ghosts: Vec<f64> = luminance(&full).iter().zip(&p).map(|(a, b)| (a - b).max(0.0)).collect();
        let (c0, c1) = (centroid(&p, w), centroid(&ghosts, w));
        gaps.push(((c1.0 - c0.0).powi(2) + (c1.1 - c0.1).powi(2)).sqrt());
        xs.push(2.0 * d_mm * 1e-3 * tan_t);
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, gaps.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&gaps).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = xs.iter().zip(&gaps).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    let ss_tot: f64 = gaps.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = 1.0 - ss_res / ss_tot;
    ensure(slope > 0.0 && r2 >= 0.99, format!("(b) R^2 {r2:.5}, gaps {gaps:?}"))?;

    // (c) Roughness blurs the reflection.
    let lap: Vec<f64> = [0.0, 0.01, 0.03, 0.05]
        .iter()
        .map(|&roughness| {
            let m = GlassMaterial { ior: 1.5, roughness, ..Default::default() };
            mean_abs_laplacian(&render(&scene, &m, 64, 3, RefractionMode::Aligned).reflection)
        })
        .collect();
    ensure(lap.windows(2).all(|p| p[1] <= p[0]), format!("(c) |Laplacian| increased: {lap:?}"))?;

    Ok(format!(
        "(a) mean R {:.5?}; (b) gaps px {:.3?}, R^2 {r2:.5}; (c) |lap| {:.5?}",
        means, gaps, lap
    ))
}

fn ground_truth_protocol() -> Check {
    let gt = GlassMaterial { ior: 1.0, metallic: 0.0, roughness: 0.0, ..Default::default() };
    let mut details = Vec::new();
    for mode in [ReflectionMode::Envmap, ReflectionMode::Plane] {
        let mut c = SceneConfig::default();
        c.camera.width = 96;
        c.camera.height = 64;
        c.glass.tilt_deg = 12.0;
        c.reflection = ReflectionConfig { mode, ..Default::default() };
        let refl = if mode == ReflectionMode::Envmap { sky(128, 64) } else { checker(64, 64, 4) };
        let scene = solve_geometry(&c, value_noise(48, 32, 3), refl).map_err(|e| e.to_string())?;
        let out = render(&scene, &gt, 16, 3, RefractionMode::Aligned);
        let same = out.blended.data().iter().zip(out.transmission.data()).all(|(a, b)| a.to_bits() == b.to_bits());
        ensure(same, format!("{mode:?}: B differs from T"))?;
        ensure(out.reflection.data().iter().all(|&v| v == 0.0), format!("{mode:?}: R is not zero"))?;
        details.push(format!("{mode:?}").to_lowercase());
    }
    Ok(format!("B == T bitwise and R == 0 in {} modes", details.join(" and ")))
}

/// Zero-mean normalized cross-correlation of `b` shifted by (dx, dy) against `a`.
fn xcorr_peak(a: &[f64], b: &[f64], w: usize, h: usize, radius: isize) -> (isize, isize) {
    let m = radius as usize;
    let mut best = (f64::MIN, (0, 0));
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let mut pairs = Vec::with_capacity((w - 2 * m) * (h - 2 * m));
            for y in m..h - m {
                for x in m..w - m {
                    let j = (y as isize + dy) as usize * w + (x as isize + dx) as usize;
                    pairs.push((a[y * w + x], b[j]));
                }
            }
            let n = pairs.len() as f64;
            let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n;
            let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n;
            let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
            for (p, q) in &pairs {
                cov += (p - ma) * (q - mb);
                va += (p - ma).powi(2);
                vb += (q - mb).powi(2);
            }
            let r = cov / (va * vb).sqrt();
            if r > best.0 {
                best = (r, (dx, dy));
            }
        }
    }
    best.1
}

fn alignment() -> Check {
    let mut c = SceneConfig::default();
    c.camera.width = 608;
    c.camera.height = 608;
    c.camera.fov_x = 60.0;
    c.glass.tilt_deg = 30.0;
    c.background.distance_m = 2.0;
    let scene = solve_geometry(&c, value_noise(152, 152, 9), sky(128, 64)).map_err(|e| e.to_string())?;
    let m = GlassMaterial { ior: 1.5, thickness: 0.05, ..Default::default() };
    let mut peaks = Vec::new();
    for mode in [RefractionMode::Aligned, RefractionMode::Exact] {
        let out = render(&scene, &m, 1, 3, mode);
        let t = luminance(&out.transmission);
        let bt: Vec<f64> = out
            .blended
            .data()
            .chunks(3)
            .zip(out.reflection.data().chunks(3))
            .map(|(b, r)| lum(&[b[0] - r[0], b[1] - r[1], b[2] - r[2]]))
            .collect();
        peaks.push(xcorr_peak(&t, &bt, 608, 608, 5));
    }
    ensure(peaks[0] == (0, 0), format!("aligned peak at {:?}", peaks[0]))?;
    ensure(peaks[1] != (0, 0), "exact-mode control shows no shift; correlation is insensitive")?;

    // Validator through the command line on the same rig.
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_pattern_png(&tmp.path().join("bg.png"), 152, 152, 1);
    write_sky(&tmp.path().join("sky.hdr"), 128, 64, 0);
    let cfg = tmp.path().join("scene.json");
    std::fs::write(
        &cfg,
        r#"{"camera": {"width": 608, "height": 608, "fov_x": 60.0},
            "glass": {"distance_m": 0.5, "tilt_deg": 30.0},
            "background": {"distance_m": 2.0, "image": "bg.png"},
            "reflection": {"mode": "envmap", "image": "sky.hdr"}}"#,
    )
    .map_err(|e| e.to_string())?;
    let o = glassforge(&[
        "validate", "--config", cfg.to_str().unwrap(), "--material", r#"{"ior":1.5,"thickness":0.05}"#, "--json",
    ]);
    ensure(o.status.success(), format!("validate exited {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)))?;
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).map_err(|e| e.to_string())?;
    let shift = v["exact_center_shift_px"].as_f64().ok_or("missing exact_center_shift_px")?;

    // Lateral slab displacement d sin(i - t) / cos t, projected at the background.
    let (ti, tt) = (30f64.to_radians(), (30f64.to_radians().sin() / 1.5).asin());
    let offset = 0.05 * (ti - tt).sin() / tt.cos();
    let focal = 304.0 / 30f64.to_radians().tan();
    let analytic = offset * focal / 2.0;
    ensure((shift - analytic).abs() < 1e-3 * analytic, format!("validator {shift:.4} px vs analytic {analytic:.4} px"))?;
    ensure((shift - 2.6).abs() <= 0.05 * 2.6, format!("validator {shift:.4} px not within 5% of 2.6"))?;
    Ok(format!(
        "aligned peak {:?}, exact peak {:?}; center shift {shift:.3} px (analytic {analytic:.3}, {:+.1}% vs 2.6)",
        peaks[0],
        peaks[1],
        (shift / 2.6 - 1.0) * 100.0
    ))
}

fn alpha_blend_formula() -> Check {
    let mut rng = SplitMix64::new(31);
    for _ in 0..100 {
        let t = rng.next_f64();
        let r = rng.next_f64();
        ensure((blend_value(t, r, 1.0, 0.0) - t).abs() < 1e-9, "alpha 1, beta 0 is not T")?;
        let (a, b) = (rng.next_f64(), rng.next_f64());
        let expect = 1.0 - (1.0 - a) * (1.0 - b);
        ensure((blend_value(1.0, 1.0, a, b) - expect).abs() < 1e-9, "T = R = 1 case")?;
    }
    let v = blend_value(0.8, 0.4, 0.5, 0.5);
    ensure((v - 0.52).abs() < 1e-9, format!("worked example {v}"))?;
    let px = |v: f32| LinearImage::filled(1, 1, [v; 3]);
    let img = alpha_blend(&px(0.8), &px(0.4), &BlendParams { alpha: 0.5, beta: 0.5, blur_sigma: 0.0 })
        .map_err(|e| e.to_string())?;
    ensure((img.data()[0] as f64 - 0.52).abs() < 1e-6, "image path disagrees with the formula")?;

    let eps = 1e-3;
    for _ in 0..10_000 {
        let (t, r, a, b) = (rng.next_f64(), rng.next_f64(), rng.next_f64(), rng.next_f64());
        let v = blend_value(t, r, a, b);
        ensure((-1e-12..=1.0 + 1e-12).contains(&v), format!("out of range: {v}"))?;
        ensure((v - blend_value(r, t, b, a)).abs() < 1e-12, "swap symmetry")?;
        let up = |x: f64| (x + eps).min(1.0);
        for (bumped, name) in [
            (blend_value(up(t), r, a, b), "T"),
            (blend_value(t, up(r), a, b), "R"),
            (blend_value(t, r, up(a), b), "alpha"),
            (blend_value(t, r, a, up(b)), "beta"),
        ] {
            ensure(bumped >= v - 1e-12, format!("not monotone in {name}"))?;
        }
    }
    Ok("examples exact to 1e-9; range, symmetry and monotonicity over 10^4 draws".into())
}

// Direct per-window SSIM, independent of the library's filtering.
fn window_2d(kind: SsimWindow) -> (usize, Vec<f64>, f64) {
    match kind {
        SsimWindow::Uniform7 => (7, vec![1.0 / 49.0; 49], 49.0 / 48.0),
        SsimWindow::Gaussian11 => {
            let mut w = Vec::with_capacity(121);
            for y in 0..11 {
                for x in 0..11 {
                    let (dx, dy) = (x as f64 - 5.0, y as f64 - 5.0);
                    w.push((-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5)).exp());
                }
            }
            let s: f64 = w.iter().sum();
            (11, w.into_iter().map(|v| v / s).collect(), 1.0)
        }
    }
}

fn brute(a: &[f64], b: &[f64], w: usize, h: usize, kind: SsimWindow) -> (f64, f64) {
    let (k, win, scale) = window_2d(kind);
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let (mut s_sum, mut cs_sum, mut n) = (0.0, 0.0, 0.0);
    for y0 in 0..=h - k {
        for x0 in 0..=w - k {
            let (mut ma, mut mb) = (0.0, 0.0);
            for j in 0..k {
                for i in 0..k {
                    let p = (y0 + j) * w + x0 + i;
                    ma += win[j * k + i] * a[p];
                    mb += win[j * k + i] * b[p];
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for j in 0..k {
                for i in 0..k {
                    let p = (y0 + j) * w + x0 + i;
                    let (da, db) = (a[p] - ma, b[p] - mb);
                    va += win[j * k + i] * da * da;
                    vb += win[j * k + i] * db * db;
                    cov += win[j * k + i] * da * db;
                }
            }
            let (va, vb, cov) = (va * scale, vb * scale, cov * scale);
            let cs = (2.0 * cov + c2) / (va + vb + c2);
            s_sum += (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1) * cs;
            cs_sum += cs;
            n += 1.0;
        }
    }
    (s_sum / n, cs_sum / n)
}

fn plane(img: &SrgbImage, c: usize) -> Vec<f64> {
    img.data().chunks(3).map(|p| p[c] as f64).collect()
}

fn halve(v: &[f64], w: usize, h: usize) -> (Vec<f64>, usize, usize) {
    let (nw, nh) = (w / 2, h / 2);
    let mut out = vec![0.0; nw * nh];
    for y in 0..nh {
        for x in 0..nw {
            let s = v[2 * y * w + 2 * x] + v[2 * y * w + 2 * x + 1] + v[(2 * y + 1) * w + 2 * x] + v[(2 * y + 1) * w + 2 * x + 1];
            out[y * nw + x] = s / 4.0;
        }
    }
    (out, nw, nh)
}

fn brute_ssim(a: &SrgbImage, b: &SrgbImage, kind: SsimWindow) -> f64 {
    let (w, h) = a.dimensions();
    (0..3).map(|c| brute(&plane(a, c), &plane(b, c), w, h, kind).0).sum::<f64>() / 3.0
}

fn brute_ms_ssim(a: &SrgbImage, b: &SrgbImage) -> f64 {
    let weights = ms_ssim_weights();
    let mut total = 0.0;
    for c in 0..3 {
        let (mut pa, mut pb) = (plane(a, c), plane(b, c));
        let (mut w, mut h) = a.dimensions();
        let mut score = 1.0;
        for (level, wt) in weights.iter().enumerate() {
            let (s, cs) = brute(&pa, &pb, w, h, SsimWindow::Gaussian11);
            if level == weights.len() - 1 {
                score *= s.max(0.0).powf(*wt);
            } else {
                score *= cs.max(0.0).powf(*wt);
                let (na, nw, nh) = halve(&pa, w, h);
                pb = halve(&pb, w, h).0;
                pa = na;
                w = nw;
                h = nh;
            }
        }
        total += score;
    }
    total / 3.0
}

fn noisy_pair(w: usize, h: usize, rng: &mut SplitMix64) -> (SrgbImage, SrgbImage) {
    let noise = rng.uniform(5.0, 120.0);
    let a: Vec<u8> = (0..w * h * 3).map(|_| rng.below(256) as u8).collect();
    let b: Vec<u8> =
        a.iter().map(|&v| (v as f64 + rng.uniform(-noise, noise)).round().clamp(0.0, 255.0) as u8).collect();
    (SrgbImage::new(w, h, a).unwrap(), SrgbImage::new(w, h, b).unwrap())
}

fn metrics() -> Check {
    let base = SrgbImage::filled(64, 48, [128; 3]);
    for (delta, expect) in [(1u8, 48.1308), (2, 42.1103)] {
        let p = psnr(&base, &SrgbImage::filled(64, 48, [128 + delta; 3])).map_err(|e| e.to_string())?;
        ensure((p - expect).abs() < 1e-3, format!("psnr delta {delta}: {p}"))?;
    }
    let mut rng = SplitMix64::new(2024);
    let (mut worst_s, mut worst_ms): (f64, f64) = (0.0, 0.0);
    for i in 0..50 {
        let (a, b) = noisy_pair(16 + i % 5, 16 + i % 7, &mut rng);
        for settings in [SsimSettings::default(), SsimSettings::gaussian()] {
            let fast = ssim(&a, &b, &settings).map_err(|e| e.to_string())?;
            worst_s = worst_s.max((fast - brute_ssim(&a, &b, settings.window)).abs());
        }
        let (a, b) = noisy_pair(176 + rng.below(24), 176 + rng.below(24), &mut rng);
        let fast = ms_ssim(&a, &b).map_err(|e| e.to_string())?;
        worst_ms = worst_ms.max((fast - brute_ms_ssim(&a, &b)).abs());
        if i < 5 {
            ensure(ssim(&a, &a, &SsimSettings::default()).unwrap() == 1.0, "ssim identity")?;
            ensure(ssim(&a, &a, &SsimSettings::gaussian()).unwrap() == 1.0, "gaussian ssim identity")?;
            ensure(ms_ssim(&a, &a).unwrap() == 1.0, "ms_ssim identity")?;
        }
    }
    ensure(worst_s < 1e-6, format!("ssim off by {worst_s:.3e}"))?;
    ensure(worst_ms < 1e-5, format!("ms_ssim off by {worst_ms:.3e}"))?;
    Ok(format!("psnr anchors ok; ssim max err {worst_s:.1e}, ms_ssim max err {worst_ms:.1e}; identities exact"))
}

fn smooth_image(w: usize, h: usize, rng: &mut SplitMix64) -> LinearImage {
    let waves: Vec<[f64; 4]> = (0..4)
        .map(|_| [rng.uniform(0.002, 0.04), rng.uniform(0.002, 0.04), rng.uniform(0.0, 6.3), rng.uniform(0.02, 0.1)])
        .collect();
    LinearImage::from_fn(w, h, |x, y| {
        let v: f64 = waves.iter().map(|[fx, fy, ph, a]| a * (fx * x as f64 + fy * y as f64 + ph).sin()).sum();
        let v = (0.5 + v).clamp(0.0, 1.0) as f32;
        [v, 1.0 - v, 0.5 * v]
    })
}

fn tiler() -> Check {
    let mut rng = SplitMix64::new(608);
    let (mut worst_unity, mut worst_level, mut small) = (0.0f64, 0, 0);
    for i in 0..20 {
        let (w, h) = if i % 4 == 0 {
            (100 + rng.below(500), 100 + rng.below(1900))
        } else {
            (100 + rng.below(1901), 100 + rng.below(1901))
        };
        let plan = TilePlan::with_defaults(w, h).map_err(|e| e.to_string())?;
        for s in plan.weight_sum_map() {
            worst_unity = worst_unity.max((s - 1.0).abs());
        }
        let img = if plan.resamples() {
            small += 1;
            smooth_image(w, h, &mut rng)
        } else {
            LinearImage::from_fn(w, h, |_, _| [rng.next_f64() as f32, rng.next_f64() as f32, rng.next_f64() as f32])
        };
        let back = stitch(&split(&img, &plan).map_err(|e| e.to_string())?, &plan).map_err(|e| e.to_string())?;
        ensure(back.dimensions() == (w, h), format!("{w}x{h}: size changed"))?;
        let err = img
            .data()
            .iter()
            .zip(back.data())
            .map(|(&a, &b)| (encode_channel(a) as i32 - encode_channel(b) as i32).abs())
            .max()
            .unwrap();
        worst_level = worst_level.max(err);
    }
    ensure(worst_unity < 1e-6, format!("weight sum off by {worst_unity:.3e}"))?;
    ensure(worst_level <= 1, format!("round trip off by {worst_level} levels"))?;
    ensure(small > 0, "no size exercised the upsample path")?;
    Ok(format!("unity err {worst_unity:.1e}; max {worst_level} level(s) over 20 sizes, {small} below 608"))
}

fn dataset_config(dir: &Path, count: usize, side: usize, spp: u32) -> std::path::PathBuf {
    write_pools(dir);
    let cfg = format!(
        r#"{{"count": {count}, "master_seed": 2025,
            "pools": {{"hdr_dir": "{0}/hdr", "srgb_dir": "{0}/srgb"}},
            "scene": {{"camera": {{"width": {side}, "height": {side}}}}},
            "render": {{"spp": {spp}}},
            "output_dir": "{0}/unused"}}"#,
        dir.display()
    );
    let path = dir.join("dataset.json");
    std::fs::write(&path, cfg).unwrap();
    path
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dataset_config(tmp.path(), 8, 128, 16);
    let mut trees = Vec::new();
    for jobs in ["1", "8"] {
        let out = tmp.path().join(format!("jobs{jobs}"));
        let o = glassforge(&["dataset", "--config", cfg.to_str().unwrap(), "--jobs", jobs, "--out", out.to_str().unwrap()]);
        ensure(o.status.success(), format!("jobs {jobs}: {}", String::from_utf8_lossy(&o.stderr)))?;
        trees.push(tree_hashes(&out));
    }
    ensure(trees[0].len() == 8 * 3 + 1, format!("{} files written", trees[0].len()))?;
    ensure(trees[0] == trees[1], "trees differ between 1 and 8 jobs")?;
    Ok(format!("{} files, identical SHA-256 under 1 and 8 jobs", trees[0].len()))
}

fn ior_sweep() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dataset_config(tmp.path(), 0, 256, 16);
    let out = tmp.path().join("sweep");
    let o = glassforge(&["sweep-ior", "--config", cfg.to_str().unwrap(), "--scenes", "30", "--out", out.to_str().unwrap()]);
    ensure(o.status.success(), format!("sweep-ior: {}", String::from_utf8_lossy(&o.stderr)))?;
    let mut means = Vec::new();
    for bin in 0..5 {
        let root = out.join(format!("bin_{bin}"));
        let (_, records) = read_manifest(&root.join("manifest.jsonl")).map_err(|e| e.to_string())?;
        ensure(records.len() == 30, format!("bin {bin}: {} scenes", records.len()))?;
        let total: f64 = records
            .iter()
            .map(|r| load_image(root.join(&r.outputs.reflection)).map(|img| img.mean_luminance()))
            .sum::<Result<f64, _>>()
            .map_err(|e| e.to_string())?;
        means.push(total / records.len() as f64);
    }
    ensure(means.windows(2).all(|p| p[0] < p[1]), format!("per-bin mean R not increasing: {means:?}"))?;
    Ok(format!("5 bins x 30 scenes; mean R {means:.5?}"))
}

fn throughput() -> Check {
    let mut c = SceneConfig::default();
    c.camera.width = 512;
    c.camera.height = 512;
    c.glass.tilt_deg = 10.0;
    let scene = solve_geometry(&c, value_noise(128, 128, 1), sky(256, 128)).map_err(|e| e.to_string())?;
    let m = GlassMaterial { roughness: 0.03, ..Default::default() };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    let start = Instant::now();
    pool.install(|| render(&scene, &m, 16, 3, RefractionMode::Aligned));
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("512x512 spp 16 on one thread in {secs:.3} s (target < 2 s)");
    if secs < 2.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("energy conservation", energy_conservation, true),
        ("fresnel anchors", fresnel_anchors, true),
        ("ior, thickness and roughness factors", factor_reproduction, true),
        ("ground-truth protocol", ground_truth_protocol, true),
        ("pixel alignment", alignment, true),
        ("alpha-blend formula", alpha_blend_formula, true),
        ("metrics", metrics, true),
        ("tiler", tiler, true),
        ("dataset determinism", determinism, true),
        ("ior sweep", ior_sweep, true),
        ("throughput (soft)", throughput, false),
    ];
    let mut failed = 0;
    for (i, (name, check, required)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{ms} ms]", i + 1),
            Err(detail) if *required => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{ms} ms]", i + 1);
            }
            Err(detail) => println!("FAIL {:>2} {name} (informational): {detail} [{ms} ms]", i + 1),
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} required criteria failed");
        ExitCode::FAILURE
    }
}
