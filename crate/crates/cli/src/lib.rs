//! `glassforge` command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 validation or runtime failure,
//! 3 dataset finished with too many failed samples.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::RenderFile;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "glassforge", version, about = "Synthesize and evaluate glass-reflection image triplets")]
pub struct Cli {
    /// Print a single JSON summary document on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Worker threads (default: available parallelism). Results do not
    /// depend on this value.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render one B/T/R triplet from a scene config.
    Render(RenderArgs),
    /// Generate a dataset of triplets with a manifest.
    Dataset(DatasetArgs),
    /// Build the IoR-sweep benchmark: the same scenes under increasing IoR.
    SweepIor(SweepArgs),
    /// Alpha-blend a transmission and a reflection image.
    Blend(BlendArgs),
    /// Score predictions against ground truth (same file names).
    Eval(EvalArgs),
    /// Split an image into overlapping tiles plus a plan file.
    Tile(TileArgs),
    /// Reassemble tiles written by `tile` (or processed copies of them).
    Stitch(StitchArgs),
    /// Report scene coverage and exact-refraction pixel shift.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Aligned,
    Exact,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReflectionArg {
    Envmap,
    Plane,
}

/// Scene and material inputs shared by `render` and `validate`.
#[derive(Debug, Args)]
pub struct SceneArgs {
    /// Scene JSON: camera, glass, background, reflection, and optionally
    /// material and settings. Image paths are relative to the file.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Material as inline JSON, or @FILE.
    #[arg(long, value_name = "JSON")]
    pub material: Option<String>,
    /// Transmission (background) image.
    #[arg(long, value_name = "IMAGE")]
    pub background: Option<PathBuf>,
    /// Reflection source image (environment map or plane texture).
    #[arg(long, value_name = "IMAGE")]
    pub reflection: Option<PathBuf>,
    /// Reflection source kind.
    #[arg(long, value_enum)]
    pub reflection_mode: Option<ReflectionArg>,
    #[arg(long, value_name = "PX")]
    pub width: Option<usize>,
    #[arg(long, value_name = "PX")]
    pub height: Option<usize>,
    /// Horizontal field of view in degrees.
    #[arg(long, value_name = "DEG")]
    pub fov: Option<f64>,
    /// Glass rotation about the vertical axis in degrees.
    #[arg(long, value_name = "DEG")]
    pub glass_tilt: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Samples per pixel for the reflected component.
    #[arg(long)]
    pub spp: Option<u32>,
    /// Highest ghost order.
    #[arg(long)]
    pub max_order: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub refraction_mode: Option<ModeArg>,
    /// Also write linear float32 B.raw/T.raw/R.raw.
    #[arg(long)]
    pub raw: bool,
    /// Output directory for B.png, T.png and R.png.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Dataset JSON config.
    #[arg(long, value_name = "FILE")]
    pub config: PathBuf,
    #[arg(long)]
    pub count: Option<usize>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub spp: Option<u32>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Dataset JSON config (IoR range is replaced per bin).
    #[arg(long, value_name = "FILE")]
    pub config: PathBuf,
    /// Scenes per bin.
    #[arg(long, default_value_t = glassforge::dataset::DEFAULT_SWEEP_SCENES)]
    pub scenes: usize,
    /// Comma-separated LO:HI IoR bins in increasing order.
    #[arg(long, value_name = "LO:HI,...")]
    pub bins: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub spp: Option<u32>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SpaceArg {
    Srgb,
    Linear,
}

#[derive(Debug, Args)]
pub struct BlendArgs {
    #[arg(long, value_name = "IMAGE")]
    pub transmission: PathBuf,
    #[arg(long, value_name = "IMAGE")]
    pub reflection: PathBuf,
    #[arg(long, value_name = "PNG")]
    pub out: PathBuf,
    /// Transmission weight; drawn from [0.6, 1] when omitted.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Reflection weight; drawn from [0.1, 0.5] when omitted.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Reflection blur in pixels; drawn from [0, 5] when omitted.
    #[arg(long)]
    pub blur_sigma: Option<f64>,
    /// Seed for parameters that are drawn.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Space the formula is applied in.
    #[arg(long, value_enum, default_value = "srgb")]
    pub space: SpaceArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WindowArg {
    Uniform7,
    Gaussian11,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "DIR")]
    pub pred: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub gt: PathBuf,
    /// SSIM window preset.
    #[arg(long, value_enum, default_value = "uniform7")]
    pub window: WindowArg,
    /// Also write the report JSON here.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TileArgs {
    #[arg(long, value_name = "IMAGE")]
    pub input: PathBuf,
    /// Directory for tile_NNNN.png and plan.json.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, default_value_t = glassforge::tiler::DEFAULT_TILE_SIZE)]
    pub tile_size: usize,
    #[arg(long, default_value_t = glassforge::tiler::DEFAULT_MIN_OVERLAP)]
    pub min_overlap: usize,
}

#[derive(Debug, Args)]
pub struct StitchArgs {
    /// Directory holding plan.json and tile_NNNN.png.
    #[arg(long, value_name = "DIR")]
    pub tiles: PathBuf,
    /// Plan file (default: plan.json inside the tile directory).
    #[arg(long, value_name = "FILE")]
    pub plan: Option<PathBuf>,
    #[arg(long, value_name = "PNG")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Fail (exit 2) when the exact-mode shift exceeds this many pixels.
    #[arg(long, value_name = "PX")]
    pub max_shift: Option<f64>,
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        Self { code: EXIT_FAILURE, error: e.into() }
    }
}

/// Parse `argv` (including the program name), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            if cli.json {
                println!("{summary}");
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            e.code
        }
    }
}

/// Run a parsed command and return its JSON summary.
pub fn execute(cli: &Cli) -> Result<serde_json::Value, CliError> {
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = cli.jobs {
            if n == 0 {
                return Err(CliError { code: EXIT_USAGE, error: anyhow::anyhow!("--jobs must be >= 1") });
            }
            b = b.num_threads(n);
        }
        b.build()?
    };
    let human = !cli.json;
    pool.install(|| match &cli.command {
        Command::Render(a) => commands::render(a, human),
        Command::Dataset(a) => commands::dataset(a, human),
        Command::SweepIor(a) => commands::sweep(a, human),
        Command::Blend(a) => commands::blend(a, human),
        Command::Eval(a) => commands::eval(a, human),
        Command::Tile(a) => commands::tile(a, human),
        Command::Stitch(a) => commands::stitch(a, human),
        Command::Validate(a) => commands::validate(a, human),
    })
}
