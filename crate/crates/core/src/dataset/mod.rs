//! Deterministic batch synthesis of B/T/R triplets with a JSON Lines
//! manifest, plus the IoR-sweep benchmark builder.
//!
//! Sample `i` draws every random choice from a stream seeded by
//! `(master_seed, i)` in a fixed order, so outputs are independent of worker
//! count and scheduling. The manifest is assembled in index order after all
//! samples finish.

mod pools;
mod sampling;

pub use pools::{AssetPools, PoolDirs, ASSET_ROOT_ENV};
pub use sampling::{sample_material, ParamRanges};

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::alphablend::{blend_srgb, BlendParams, BlendRanges, BlendSpace};
use crate::imagecore::{load_image, save_png, srgb_encode, LinearImage};
use crate::optics::GlassMaterial;
use crate::renderer::{render_triple, RenderSettings};
use crate::rng::{self, SplitMix64};
use crate::scene::{solve_geometry, ReflectionMode, SceneConfig};

pub const MANIFEST_NAME: &str = "manifest.jsonl";
pub const MANIFEST_FORMAT: &str = "glassforge-manifest";
pub const MANIFEST_VERSION: u32 = 1;
/// Mean luminance sources are normalized to before the exposure offset.
pub const GRAY_ANCHOR: f64 = 0.18;
/// Tolerated fraction of failed samples.
pub const FAILURE_BUDGET: f64 = 0.01;
pub const DEFAULT_SWEEP_SCENES: usize = 30;
pub const DEFAULT_IOR_BINS: [[f64; 2]; 5] = [[1.1, 1.2], [1.2, 1.35], [1.35, 1.5], [1.5, 1.65], [1.65, 1.8]];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid {name} range [{lo}, {hi}]")]
    Range { name: &'static str, lo: f64, hi: f64 },
    #[error("asset pool: {0}")]
    Pool(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{failed} of {count} samples failed (limit 1%); manifest written to {manifest}")]
    PartialFailure { failed: usize, count: usize, manifest: PathBuf },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

/// How sources are drawn from the two pools.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixingRule {
    /// Probability that the reflection is an HDR environment map; otherwise
    /// it is an sRGB image on a plane.
    pub reflection_hdr_prob: f64,
    /// Probability that the transmission scene comes from the HDR pool.
    pub background_hdr_prob: f64,
}

impl Default for MixingRule {
    fn default() -> Self {
        Self { reflection_hdr_prob: 0.5, background_hdr_prob: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub count: usize,
    pub master_seed: u64,
    pub ranges: ParamRanges,
    pub pools: PoolDirs,
    /// Template; image paths and reflection mode are filled per sample.
    pub scene: SceneConfig,
    /// Render settings; the seed is replaced per sample.
    pub render: RenderSettings,
    pub output_dir: PathBuf,
    pub mixing: MixingRule,
    /// When set, an alpha-blended `A.png` is written next to each triplet.
    pub blend: Option<BlendRanges>,
    /// Store wall-clock render time in the manifest. Off by default because
    /// it makes manifests differ between runs.
    pub record_timings: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            count: 0,
            master_seed: 0,
            ranges: ParamRanges::default(),
            pools: PoolDirs::default(),
            scene: SceneConfig::default(),
            render: RenderSettings::default(),
            output_dir: PathBuf::from("dataset"),
            mixing: MixingRule::default(),
            blend: None,
            record_timings: false,
        }
    }
}

impl DatasetConfig {
    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        self.ranges.validate()?;
        for (name, p) in [
            ("reflection_hdr_prob", self.mixing.reflection_hdr_prob),
            ("background_hdr_prob", self.mixing.background_hdr_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(DatasetError::Config(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if self.render.spp == 0 {
            return Err(DatasetError::Config("render.spp must be >= 1".into()));
        }
        Ok(())
    }

    /// Digest of everything except the output location.
    fn digest(&self) -> Result<String, DatasetError> {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        Ok(sha256_hex(&serde_json::to_vec(&c)?))
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pool {
    Hdr,
    Srgb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRecord {
    pub pool: Pool,
    pub path: PathBuf,
    pub exposure_log2: f64,
}

/// Every input that determines one sample's output bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub index: usize,
    pub seed: u64,
    pub scene: SceneConfig,
    pub material: GlassMaterial,
    pub render: RenderSettings,
    pub background: SourceRecord,
    pub reflection: SourceRecord,
    pub blend: Option<BlendParams>,
}

impl SampleSpec {
    pub fn digest(&self) -> Result<String, DatasetError> {
        Ok(sha256_hex(&serde_json::to_vec(self)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    #[serde(rename = "B")]
    pub blended: PathBuf,
    #[serde(rename = "T")]
    pub transmission: PathBuf,
    #[serde(rename = "R")]
    pub reflection: PathBuf,
    #[serde(rename = "A", skip_serializing_if = "Option::is_none", default)]
    pub alpha_blended: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub format: String,
    pub version: u32,
    pub count: usize,
    pub master_seed: u64,
    pub config_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub index: usize,
    pub seed: u64,
    pub scene_digest: String,
    pub material: GlassMaterial,
    pub reflection_mode: ReflectionMode,
    pub background: SourceRecord,
    pub reflection: SourceRecord,
    pub blend: Option<BlendParams>,
    /// Relative to the dataset root.
    pub outputs: OutputPaths,
    pub miss_fraction: f64,
    pub max_shift_px: f64,
    pub render_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub manifest: PathBuf,
    pub written: usize,
    pub failures: Vec<SampleFailure>,
}

/// Pure per-sample draws. Order: material, reflection pool, background pool,
/// reflection asset, background asset, background and reflection exposure,
/// render seed, blend parameters.
pub fn plan_sample(config: &DatasetConfig, pools: &AssetPools, index: usize) -> Result<SampleSpec, DatasetError> {
    let seed = rng::derive(config.master_seed, index as u64);
    let mut rng = SplitMix64::new(seed);
    let material = sample_material(&mut rng, &config.ranges);
    let refl_hdr = rng.bernoulli(config.mixing.reflection_hdr_prob);
    let bg_hdr = rng.bernoulli(config.mixing.background_hdr_prob);
    let pick = |rng: &mut SplitMix64, hdr: bool, role: &str| {
        let (pool, list) = if hdr { (Pool::Hdr, &pools.hdr_pool) } else { (Pool::Srgb, &pools.srgb_pool) };
        if list.is_empty() {
            return Err(DatasetError::Pool(format!("{role} needs a nonempty {pool:?} pool")));
        }
        Ok((pool, list[rng.below(list.len())].clone()))
    };
    let (refl_pool, refl_path) = pick(&mut rng, refl_hdr, "reflection")?;
    let (bg_pool, bg_path) = pick(&mut rng, bg_hdr, "background")?;
    let [lo, hi] = config.ranges.exposure_log2;
    let bg_exposure = rng.uniform(lo, hi);
    let refl_exposure = rng.uniform(lo, hi);
    let render_seed = rng.next_u64();
    let blend = config.blend.map(|r| r.sample(&mut rng));

    let mut scene = config.scene.clone();
    scene.background.image = Some(bg_path.clone());
    scene.reflection.image = Some(refl_path.clone());
    scene.reflection.mode = if refl_hdr { ReflectionMode::Envmap } else { ReflectionMode::Plane };
    let render = RenderSettings { seed: render_seed, ..config.render.clone() };
    Ok(SampleSpec {
        index,
        seed,
        scene,
        material,
        render,
        background: SourceRecord { pool: bg_pool, path: bg_path, exposure_log2: bg_exposure },
        reflection: SourceRecord { pool: refl_pool, path: refl_path, exposure_log2: refl_exposure },
        blend,
    })
}

/// Scale so that mean luminance is `GRAY_ANCHOR * 2^stops`. Black images are
/// left unchanged.
pub fn normalize_exposure(img: &mut LinearImage, stops: f64) {
    let m = img.mean_luminance();
    if m > 0.0 {
        img.scale((GRAY_ANCHOR * stops.exp2() / m) as f32);
    }
}

fn load_source(pools: &AssetPools, src: &SourceRecord) -> Result<LinearImage, String> {
    let mut img = load_image(pools.resolve(&src.path)).map_err(|e| e.to_string())?;
    normalize_exposure(&mut img, src.exposure_log2);
    Ok(img)
}

fn sample_dir_name(index: usize) -> String {
    format!("{index:06}")
}

fn run_sample(
    spec: &SampleSpec,
    pools: &AssetPools,
    root: &Path,
    record_timings: bool,
) -> Result<ManifestRecord, String> {
    let background = load_source(pools, &spec.background)?;
    let reflection = load_source(pools, &spec.reflection)?;
    let scene = solve_geometry(&spec.scene, background, reflection).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let triple = render_triple(&scene, &spec.material, &spec.render).map_err(|e| e.to_string())?;
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;

    let rel = PathBuf::from(sample_dir_name(spec.index));
    let dir = root.join(&rel);
    triple.write_pngs(&dir).map_err(|e| e.to_string())?;
    let alpha_blended = match &spec.blend {
        Some(params) => {
            let t = srgb_encode(&triple.transmission).map_err(|e| e.to_string())?;
            let r = srgb_encode(&triple.reflection).map_err(|e| e.to_string())?;
            let a = blend_srgb(&t, &r, params, BlendSpace::Srgb).map_err(|e| e.to_string())?;
            save_png(&a, dir.join("A.png")).map_err(|e| e.to_string())?;
            Some(rel.join("A.png"))
        }
        None => None,
    };
    Ok(ManifestRecord {
        index: spec.index,
        seed: spec.seed,
        scene_digest: spec.digest().map_err(|e| e.to_string())?,
        material: spec.material,
        reflection_mode: spec.scene.reflection.mode,
        background: spec.background.clone(),
        reflection: spec.reflection.clone(),
        blend: spec.blend,
        outputs: OutputPaths {
            blended: rel.join("B.png"),
            transmission: rel.join("T.png"),
            reflection: rel.join("R.png"),
            alpha_blended,
        },
        miss_fraction: triple.miss_fraction,
        max_shift_px: triple.max_shift_px,
        render_ms: record_timings.then_some(elapsed_ms),
    })
}

/// Generate with pools listed from the config (honoring the asset root
/// environment variable).
pub fn generate_dataset(config: &DatasetConfig) -> Result<DatasetSummary, DatasetError> {
    let pools = AssetPools::from_dirs(&config.pools)?;
    generate_with_pools(config, &pools)
}

pub fn generate_with_pools(config: &DatasetConfig, pools: &AssetPools) -> Result<DatasetSummary, DatasetError> {
    config.validate()?;
    let root = &config.output_dir;
    std::fs::create_dir_all(root).map_err(io_err(root))?;

    let results: Vec<Result<ManifestRecord, SampleFailure>> = (0..config.count)
        .into_par_iter()
        .map(|i| {
            let outcome = plan_sample(config, pools, i)
                .map_err(|e| e.to_string())
                .and_then(|spec| run_sample(&spec, pools, root, config.record_timings));
            outcome.map_err(|reason| {
                log::warn!("sample {i} skipped: {reason}");
                // Keep the tree consistent with the manifest.
                let _ = std::fs::remove_dir_all(root.join(sample_dir_name(i)));
                SampleFailure { index: i, reason }
            })
        })
        .collect();

    let header = ManifestHeader {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        count: config.count,
        master_seed: config.master_seed,
        config_digest: config.digest()?,
    };
    let manifest = root.join(MANIFEST_NAME);
    let mut text = serde_json::to_string(&header)?;
    text.push('\n');
    let mut failures = Vec::new();
    let mut written = 0;
    for r in results {
        match r {
            Ok(rec) => {
                text.push_str(&serde_json::to_string(&rec)?);
                text.push('\n');
                written += 1;
            }
            Err(f) => failures.push(f),
        }
    }
    let mut file = std::fs::File::create(&manifest).map_err(io_err(&manifest))?;
    file.write_all(text.as_bytes()).map_err(io_err(&manifest))?;

    if failures.len() as f64 > FAILURE_BUDGET * config.count as f64 {
        return Err(DatasetError::PartialFailure { failed: failures.len(), count: config.count, manifest });
    }
    Ok(DatasetSummary { manifest, written, failures })
}

/// Parse a manifest into its header and records.
pub fn read_manifest(path: &Path) -> Result<(ManifestHeader, Vec<ManifestRecord>), DatasetError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines();
    let header = serde_json::from_str(lines.next().unwrap_or_default())?;
    let records = lines.map(serde_json::from_str).collect::<Result<_, _>>()?;
    Ok((header, records))
}

fn check_bins(bins: &[[f64; 2]]) -> Result<(), DatasetError> {
    if bins.is_empty() {
        return Err(DatasetError::Config("at least one IoR bin is required".into()));
    }
    for w in bins.windows(2) {
        if w[1][0] < w[0][0] || w[1][1] < w[0][1] {
            return Err(DatasetError::Config(format!("IoR bins out of order: {:?} then {:?}", w[0], w[1])));
        }
    }
    Ok(())
}

/// Render the same scenes once per IoR bin into `output_dir/bin_<i>`. Only the
/// IoR draw interval changes between bins.
pub fn build_ior_sweep(config: &DatasetConfig, bins: &[[f64; 2]]) -> Result<Vec<PathBuf>, DatasetError> {
    check_bins(bins)?;
    let pools = AssetPools::from_dirs(&config.pools)?;
    sweep_with_pools(config, bins, &pools)
}

pub fn sweep_with_pools(
    config: &DatasetConfig,
    bins: &[[f64; 2]],
    pools: &AssetPools,
) -> Result<Vec<PathBuf>, DatasetError> {
    check_bins(bins)?;
    bins.iter()
        .enumerate()
        .map(|(i, bin)| {
            let mut c = config.clone();
            c.ranges.ior = *bin;
            c.output_dir = config.output_dir.join(format!("bin_{i}"));
            generate_with_pools(&c, pools).map(|s| s.manifest)
        })
        .collect()
}
