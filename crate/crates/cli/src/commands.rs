use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use glassforge::alphablend::{blend_srgb, BlendRanges, BlendSpace};
use glassforge::dataset::{self, DatasetConfig, DatasetError};
use glassforge::imagecore::{load_image, load_srgb, save_png, srgb_encode};
use glassforge::metrics::{evaluate_dirs, SsimSettings, SsimWindow};
use glassforge::renderer::{shift_px_at, validate_alignment};
use glassforge::rng::SplitMix64;
use glassforge::scene::{BackgroundConfig, CameraConfig, GlassConfig, ReflectionConfig, ReflectionMode, Scene};
use glassforge::tiler::{plan_tiles, split, stitch as stitch_tiles, TilePlan};
use glassforge::{render_triple, solve_geometry, GlassMaterial, RefractionMode, RenderSettings, SceneConfig};

use crate::{
    BlendArgs, CliError, DatasetArgs, EvalArgs, ModeArg, ReflectionArg, RenderArgs, SceneArgs, SpaceArg, StitchArgs,
    SweepArgs, TileArgs, ValidateArgs, WindowArg, EXIT_PARTIAL,
};

type CmdResult = Result<Value, CliError>;

/// Scene file accepted by `render` and `validate`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderFile {
    pub camera: CameraConfig,
    pub glass: GlassConfig,
    pub background: BackgroundConfig,
    pub reflection: ReflectionConfig,
    pub material: Option<GlassMaterial>,
    pub settings: Option<RenderSettings>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn parse_material(arg: &str) -> anyhow::Result<GlassMaterial> {
    match arg.strip_prefix('@') {
        Some(path) => read_json(Path::new(path)),
        None => serde_json::from_str(arg).context("parsing --material"),
    }
}

/// Scene config, material and settings after applying file then flags.
fn resolve_scene(args: &SceneArgs) -> anyhow::Result<(SceneConfig, GlassMaterial, RenderSettings)> {
    let mut file = match &args.config {
        Some(p) => {
            let mut f: RenderFile = read_json(p)?;
            let base = p.parent().unwrap_or(Path::new(""));
            for img in [&mut f.background.image, &mut f.reflection.image].into_iter().flatten() {
                if img.is_relative() {
                    *img = base.join(&*img);
                }
            }
            f
        }
        None => RenderFile::default(),
    };
    if let Some(p) = &args.background {
        file.background.image = Some(p.clone());
    }
    if let Some(p) = &args.reflection {
        file.reflection.image = Some(p.clone());
    }
    if let Some(m) = args.reflection_mode {
        file.reflection.mode = match m {
            ReflectionArg::Envmap => ReflectionMode::Envmap,
            ReflectionArg::Plane => ReflectionMode::Plane,
        };
    }
    if let Some(v) = args.width {
        file.camera.width = v;
    }
    if let Some(v) = args.height {
        file.camera.height = v;
    }
    if let Some(v) = args.fov {
        file.camera.fov_x = v;
    }
    if let Some(v) = args.glass_tilt {
        file.glass.tilt_deg = v;
    }
    let material = match &args.material {
        Some(s) => parse_material(s)?,
        None => file.material.unwrap_or_default(),
    };
    let settings = file.settings.clone().unwrap_or_default();
    let scene = SceneConfig {
        camera: file.camera,
        glass: file.glass,
        background: file.background,
        reflection: file.reflection,
    };
    Ok((scene, material, settings))
}

fn build_scene(config: &SceneConfig) -> anyhow::Result<Scene> {
    let bg = config.background.image.as_ref().ok_or_else(|| anyhow!("a background image is required"))?;
    let refl = config.reflection.image.as_ref().ok_or_else(|| anyhow!("a reflection image is required"))?;
    let bg = load_image(bg)?;
    let refl = load_image(refl)?;
    Ok(solve_geometry(config, bg, refl)?)
}

pub(crate) fn render(a: &RenderArgs, human: bool) -> CmdResult {
    let (config, material, mut settings) = resolve_scene(&a.scene)?;
    if let Some(v) = a.spp {
        settings.spp = v;
    }
    if let Some(v) = a.max_order {
        settings.max_order = v;
    }
    if let Some(v) = a.seed {
        settings.seed = v;
    }
    if let Some(m) = a.refraction_mode {
        settings.refraction_mode = match m {
            ModeArg::Aligned => RefractionMode::Aligned,
            ModeArg::Exact => RefractionMode::Exact,
        };
    }
    let scene = build_scene(&config)?;
    let start = Instant::now();
    let triple = render_triple(&scene, &material, &settings)?;
    let render_ms = start.elapsed().as_secs_f64() * 1e3;
    triple.write_pngs(&a.out)?;
    if a.raw {
        triple.write_raw(&a.out)?;
    }
    if human {
        println!(
            "wrote {} ({}x{}, {} spp) in {:.0} ms; miss fraction {:.4}, max shift {:.3} px",
            a.out.display(),
            config.camera.width,
            config.camera.height,
            settings.spp,
            render_ms,
            triple.miss_fraction,
            triple.max_shift_px
        );
    }
    Ok(json!({
        "out": a.out,
        "width": config.camera.width,
        "height": config.camera.height,
        "material": material,
        "settings": settings,
        "miss_fraction": triple.miss_fraction,
        "max_shift_px": triple.max_shift_px,
        "mean_luminance": {
            "B": triple.blended.mean_luminance(),
            "T": triple.transmission.mean_luminance(),
            "R": triple.reflection.mean_luminance(),
        },
        "render_ms": render_ms,
    }))
}

fn partial(e: DatasetError) -> CliError {
    let code = if matches!(e, DatasetError::PartialFailure { .. }) { EXIT_PARTIAL } else { crate::EXIT_FAILURE };
    CliError { code, error: e.into() }
}

fn load_dataset_config(path: &Path, seed: Option<u64>, spp: Option<u32>, out: &Option<PathBuf>) -> anyhow::Result<DatasetConfig> {
    let mut c = DatasetConfig::load(path)?;
    if let Some(s) = seed {
        c.master_seed = s;
    }
    if let Some(s) = spp {
        c.render.spp = s;
    }
    if let Some(o) = out {
        c.output_dir = o.clone();
    }
    Ok(c)
}

pub(crate) fn dataset(a: &DatasetArgs, human: bool) -> CmdResult {
    let mut c = load_dataset_config(&a.config, a.seed, a.spp, &a.out)?;
    if let Some(n) = a.count {
        c.count = n;
    }
    let s = dataset::generate_dataset(&c).map_err(partial)?;
    if human {
        println!("wrote {} of {} samples; manifest {}", s.written, c.count, s.manifest.display());
        for f in &s.failures {
            println!("  sample {} skipped: {}", f.index, f.reason);
        }
    }
    Ok(serde_json::to_value(&s)?)
}

fn parse_bins(s: &str) -> anyhow::Result<Vec<[f64; 2]>> {
    s.split(',')
        .map(|part| {
            let (lo, hi) = part.split_once(':').ok_or_else(|| anyhow!("bin {part:?} is not LO:HI"))?;
            Ok([lo.trim().parse()?, hi.trim().parse()?])
        })
        .collect()
}

pub(crate) fn sweep(a: &SweepArgs, human: bool) -> CmdResult {
    let mut c = load_dataset_config(&a.config, a.seed, a.spp, &a.out)?;
    c.count = a.scenes;
    let bins = match &a.bins {
        Some(s) => parse_bins(s).map_err(|error| CliError { code: crate::EXIT_USAGE, error })?,
        None => dataset::DEFAULT_IOR_BINS.to_vec(),
    };
    let manifests = dataset::build_ior_sweep(&c, &bins).map_err(partial)?;
    if human {
        for (bin, m) in bins.iter().zip(&manifests) {
            println!("ior [{}, {}] -> {}", bin[0], bin[1], m.display());
        }
    }
    Ok(json!({ "scenes": a.scenes, "bins": bins, "manifests": manifests }))
}

pub(crate) fn blend(a: &BlendArgs, human: bool) -> CmdResult {
    let t = load_srgb(&a.transmission)?;
    let r = load_srgb(&a.reflection)?;
    // All three draws happen regardless of which flags are set.
    let mut params = BlendRanges::default().sample(&mut SplitMix64::new(a.seed));
    if let Some(v) = a.alpha {
        params.alpha = v;
    }
    if let Some(v) = a.beta {
        params.beta = v;
    }
    if let Some(v) = a.blur_sigma {
        params.blur_sigma = v;
    }
    let space = match a.space {
        SpaceArg::Srgb => BlendSpace::Srgb,
        SpaceArg::Linear => BlendSpace::Linear,
    };
    let out = blend_srgb(&t, &r, &params, space)?;
    save_png(&out, &a.out)?;
    if human {
        println!(
            "wrote {} (alpha {:.4}, beta {:.4}, blur {:.3} px)",
            a.out.display(),
            params.alpha,
            params.beta,
            params.blur_sigma
        );
    }
    Ok(json!({ "out": a.out, "params": params, "space": space }))
}

pub(crate) fn eval(a: &EvalArgs, human: bool) -> CmdResult {
    let settings = match a.window {
        WindowArg::Uniform7 => SsimSettings::default(),
        WindowArg::Gaussian11 => SsimSettings::gaussian(),
    };
    let report = evaluate_dirs(&a.pred, &a.gt, &settings)?;
    if let Some(p) = &a.report {
        write_json(p, &report)?;
    }
    if human {
        let window = match settings.window {
            SsimWindow::Uniform7 => "uniform7",
            SsimWindow::Gaussian11 => "gaussian11",
        };
        println!("{:<32} {:>9} {:>8} {:>8}", "name", "psnr", "ssim", "ms-ssim");
        for r in &report.records {
            let ms = r.msssim.map_or("-".to_string(), |v| format!("{v:.4}"));
            println!("{:<32} {:>9.3} {:>8.4} {:>8}", r.name, r.psnr, r.ssim, ms);
        }
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!(
            "mean over {} pairs (ssim window {window}): psnr {} ssim {} ms-ssim {}",
            report.means.count,
            fmt(report.means.psnr),
            fmt(report.means.ssim),
            fmt(report.means.msssim)
        );
        if !report.unmatched.is_empty() {
            println!("unmatched: {}", report.unmatched.join(", "));
        }
    }
    Ok(serde_json::to_value(&report)?)
}

const PLAN_NAME: &str = "plan.json";

fn tile_name(i: usize) -> String {
    format!("tile_{i:04}.png")
}

pub(crate) fn tile(a: &TileArgs, human: bool) -> CmdResult {
    let img = load_image(&a.input)?;
    let (w, h) = img.dimensions();
    let plan = plan_tiles(w, h, a.tile_size, a.min_overlap)?;
    let tiles = split(&img, &plan)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for (i, t) in tiles.iter().enumerate() {
        save_png(&srgb_encode(t)?, a.out.join(tile_name(i)))?;
    }
    write_json(&a.out.join(PLAN_NAME), &plan)?;
    if human {
        println!(
            "{} tiles of {}px from {}x{} (working {}x{}) in {}",
            tiles.len(),
            plan.tile_size,
            w,
            h,
            plan.working_size[0],
            plan.working_size[1],
            a.out.display()
        );
    }
    Ok(json!({ "tiles": tiles.len(), "out": a.out, "plan": plan }))
}

pub(crate) fn stitch(a: &StitchArgs, human: bool) -> CmdResult {
    let plan_path = a.plan.clone().unwrap_or_else(|| a.tiles.join(PLAN_NAME));
    let plan: TilePlan = read_json(&plan_path)?;
    let tiles = (0..plan.tile_count())
        .map(|i| load_image(a.tiles.join(tile_name(i))))
        .collect::<Result<Vec<_>, _>>()?;
    let img = stitch_tiles(&tiles, &plan)?;
    save_png(&srgb_encode(&img)?, &a.out)?;
    if human {
        println!("stitched {} tiles into {}", tiles.len(), a.out.display());
    }
    Ok(json!({ "out": a.out, "tiles": tiles.len(), "size": plan.source_size }))
}

pub(crate) fn validate(a: &ValidateArgs, human: bool) -> CmdResult {
    let (config, material, _) = resolve_scene(&a.scene)?;
    material.validate()?;
    let scene = build_scene(&config)?;
    let (w, h) = (config.camera.width as f64, config.camera.height as f64);
    let max_shift = validate_alignment(&scene, &material);
    let center = shift_px_at(&scene, &material, 0.5 * w, 0.5 * h);
    let within = a.max_shift.is_none_or(|lim| max_shift <= lim);
    let report = json!({
        "coverage": "ok",
        "material": material,
        "aligned_shift_px": 0.0,
        "exact_max_shift_px": max_shift,
        "exact_center_shift_px": center,
        "max_shift_limit_px": a.max_shift,
        "within_limit": within,
    });
    if human {
        println!("coverage: ok");
        println!("exact-mode shift: max {max_shift:.3} px, center {center:.3} px (aligned mode: 0)");
    }
    if !within {
        return Err(CliError {
            code: crate::EXIT_FAILURE,
            error: anyhow!("exact-mode shift {max_shift:.3} px exceeds limit {:.3} px", a.max_shift.unwrap_or(0.0)),
        });
    }
    Ok(report)
}
