mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{parse_range, parse_rgb, RunConfig, CACHE_ENV};

/// Synthetic map-text dataset generator and polygon-matching evaluator.
#[derive(Debug, Parser)]
#[command(name = "mapsynth", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Place, render and annotate labels on 2×2 tile scenes and export a dataset.
    Generate(GenerateArgs),
    /// Annotate colored label layers (`<id>.png` plus `<id>.txt` sidecars).
    Annotate(AnnotateArgs),
    /// Score detections against ground truth and write a CSV report.
    Evaluate(EvaluateArgs),
    /// F1 table over a grid of area-recall and area-precision thresholds.
    Sweep(SweepArgs),
    /// Recount a dataset directory and check it against its manifest.
    Stats(StatsArgs),
    /// Download background tiles into the cache.
    FetchTiles(FetchArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML run configuration; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long, global = true)]
    print_config: bool,
    /// Worker threads (0 = all cores).
    #[arg(long, short = 'j', global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
struct SourceArgs {
    /// GeoJSON feature collection with `name` and `fclass` properties.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Local tile directory laid out as `<z>/<x>/<y>.png`.
    #[arg(long, conflicts_with = "tile_url")]
    tile_dir: Option<PathBuf>,
    /// Tile server template containing `{z}`, `{x}` and `{y}`.
    #[arg(long)]
    tile_url: Option<String>,
    /// Download cache for remote tiles.
    #[arg(long, env = CACHE_ENV)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    zoom: Option<u8>,
    /// Scene side in pixels (two tiles).
    #[arg(long)]
    scene_size: Option<u32>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// File listing 16 font paths; the built-in bitmap font is used otherwise.
    #[arg(long)]
    font_set: Option<PathBuf>,
    /// `class,group` lines extending the feature-class table.
    #[arg(long)]
    style_table: Option<PathBuf>,
    #[arg(long)]
    px_per_pt: Option<f64>,
    #[arg(long)]
    letter_spacing: Option<f64>,
    /// Worn-out noise std in 8-bit units (0 disables).
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Supersampling of the visible text layer (1 = hard alpha).
    #[arg(long)]
    antialias: Option<u32>,
    /// Ink color as `r,g,b`.
    #[arg(long, value_parser = parse_rgb)]
    ink: Option<[u8; 3]>,
}

#[derive(Debug, Args)]
struct AnnotArgs {
    /// Alpha-shape parameter; triangles with circumradius >= 1/alpha are dropped.
    #[arg(long)]
    alpha: Option<f64>,
    /// Boundary densification step for the Voronoi skeleton, in pixels.
    #[arg(long)]
    interpolation_distance: Option<f64>,
    /// Arc-length spacing of exported centerline points.
    #[arg(long)]
    sample_step: Option<f64>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Area-recall threshold.
    #[arg(long)]
    t_r: Option<f64>,
    /// Area-precision threshold.
    #[arg(long)]
    t_p: Option<f64>,
    /// Match value of splits and merges.
    #[arg(long)]
    k: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    render: RenderArgs,
    #[command(flatten)]
    annot: AnnotArgs,
    /// Dataset output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Scene ids `<z>_<x>_<y>` (even x and y); default is every block with features.
    #[arg(long = "scene")]
    scenes: Vec<String>,
    /// Keep at most this many scenes.
    #[arg(long)]
    max_scenes: Option<usize>,
    /// Also write `colored/<id>.png` and its sidecar for `annotate`.
    #[arg(long)]
    keep_colored: bool,
    /// Also write `overlay/<id>.png` with polygons and centerlines drawn.
    #[arg(long)]
    overlay: bool,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    annot: AnnotArgs,
    /// Directory of colored layers.
    #[arg(long)]
    colored: PathBuf,
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Ink color the layers were indexed against, as `r,g,b`.
    #[arg(long, value_parser = parse_rgb)]
    ink: Option<[u8; 3]>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    eval: EvalArgs,
    /// Ground truth: a dataset root or a directory of `gt_<id>.txt` files.
    #[arg(long)]
    gt: PathBuf,
    /// Detections: a directory of `res_<id>.txt` / `<id>.txt` files.
    #[arg(long)]
    det: PathBuf,
    /// CSV report path.
    #[arg(long)]
    report: Option<PathBuf>,
    /// CSV of `image_id,series` rows for per-series means.
    #[arg(long)]
    series: Option<PathBuf>,
    /// Also write a threshold sweep, `start:end:step`.
    #[arg(long, value_parser = parse_range)]
    sweep: Option<(f64, f64, f64)>,
    /// Sweep CSV path (default `sweep.csv` next to the report, else stdout).
    #[arg(long)]
    sweep_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    det: PathBuf,
    /// Threshold grid for both t_r and t_p, `start:end:step`.
    #[arg(long, value_parser = parse_range, default_value = "0.1:0.9:0.1")]
    range: (f64, f64, f64),
    #[arg(long)]
    k: Option<f64>,
    /// CSV path; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Dataset root.
    dir: PathBuf,
    /// Rewrite the manifest from the recount.
    #[arg(long)]
    write: bool,
}

#[derive(Debug, Args)]
pub struct FetchArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    source: SourceArgs,
    /// Explicit tiles `<z>/<x>/<y>`; default is every scene block of `--features`.
    #[arg(long = "tile")]
    tiles: Vec<String>,
    /// Attempts per tile for transient failures.
    #[arg(long, default_value_t = 3)]
    attempts: u32,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl CommonArgs {
    fn base(&self) -> Result<RunConfig, commands::CliError> {
        let mut cfg = RunConfig::load(self.config.as_deref()).map_err(commands::CliError::Usage)?;
        set(&mut cfg.jobs, self.jobs);
        Ok(cfg)
    }
}

impl SourceArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if self.features.is_some() {
            cfg.features = self.features.clone();
        }
        if self.tile_dir.is_some() {
            cfg.tile_dir = self.tile_dir.clone();
            cfg.tile_url = None;
        }
        if self.tile_url.is_some() {
            cfg.tile_url = self.tile_url.clone();
            cfg.tile_dir = None;
        }
        if self.cache_dir.is_some() {
            cfg.cache_dir = self.cache_dir.clone();
        }
        set(&mut cfg.zoom, self.zoom);
        set(&mut cfg.scene_size, self.scene_size);
    }
}

impl RenderArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        if self.font_set.is_some() {
            cfg.font_set = self.font_set.clone();
        }
        if self.style_table.is_some() {
            cfg.style_table = self.style_table.clone();
        }
        set(&mut cfg.px_per_pt, self.px_per_pt);
        set(&mut cfg.letter_spacing, self.letter_spacing);
        set(&mut cfg.noise_sigma, self.noise_sigma);
        set(&mut cfg.antialias, self.antialias);
        set(&mut cfg.ink, self.ink);
    }
}

impl AnnotArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.alpha, self.alpha);
        set(&mut cfg.interpolation_distance, self.interpolation_distance);
        set(&mut cfg.sample_step, self.sample_step);
    }
}

impl EvalArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.t_r, self.t_r);
        set(&mut cfg.t_p, self.t_p);
        set(&mut cfg.k, self.k);
    }
}

fn effective(cli: &Cli) -> Result<(RunConfig, bool), commands::CliError> {
    let (cfg, print) = match &cli.command {
        Command::Generate(a) => {
            let mut c = a.common.base()?;
            a.source.apply(&mut c);
            a.render.apply(&mut c);
            a.annot.apply(&mut c);
            if a.out.is_some() {
                c.out = a.out.clone();
            }
            (c, a.common.print_config)
        }
        Command::Annotate(a) => {
            let mut c = a.common.base()?;
            a.annot.apply(&mut c);
            set(&mut c.ink, a.ink);
            if a.out.is_some() {
                c.out = a.out.clone();
            }
            (c, a.common.print_config)
        }
        Command::Evaluate(a) => {
            let mut c = a.common.base()?;
            a.eval.apply(&mut c);
            (c, a.common.print_config)
        }
        Command::Sweep(a) => {
            let mut c = a.common.base()?;
            set(&mut c.k, a.k);
            (c, a.common.print_config)
        }
        Command::Stats(a) => (a.common.base()?, a.common.print_config),
        Command::FetchTiles(a) => {
            let mut c = a.common.base()?;
            a.source.apply(&mut c);
            (c, a.common.print_config)
        }
    };
    cfg.validate().map_err(commands::CliError::Usage)?;
    Ok((cfg, print))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = effective(&cli).and_then(|(cfg, print)| {
        if print {
            print!("{}", cfg.to_toml());
            return Ok(());
        }
        if cfg.jobs > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.jobs)
                .build_global()
                .map_err(|e| commands::CliError::Failed(e.to_string()))?;
        }
        match &cli.command {
            Command::Generate(a) => commands::generate(&cfg, a),
            Command::Annotate(a) => commands::annotate(&cfg, a),
            Command::Evaluate(a) => commands::evaluate(&cfg, a),
            Command::Sweep(a) => commands::sweep(&cfg, a),
            Command::Stats(a) => commands::stats(&cfg, a),
            Command::FetchTiles(a) => commands::fetch_tiles(&cfg, a),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
