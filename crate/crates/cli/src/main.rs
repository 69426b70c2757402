//! `courtside`: synthesize data, calibrate, train, evaluate and sweep k.

mod invocation;
mod staging;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use courtside::classifier::{GammaGrid, KernelKind};
use courtside::features::FeatureMask;
use courtside::pipeline::PipelineConfig;
use courtside::synthgen::{load_scene_config, SceneConfig};

use invocation::{Invocation, RunRecord};

#[derive(Parser, Debug)]
#[command(
    name = "courtside",
    version,
    about = "Volleyball player activity recognition with activity context"
)]
struct Cli {
    /// Worker threads (default: available parallelism). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic volleyball sequence with annotations and calibration.
    Synth(SynthArgs),
    /// Fit the image-to-court homography from point pairs.
    Calibrate(CalibrateArgs),
    /// Train stage 1 and stage 2 on a dataset directory.
    Train(TrainArgs),
    /// Evaluate a trained model on the test split of a dataset.
    Eval(EvalArgs),
    /// Retrain stage 2 for several AC window lengths and report accuracy.
    SweepK(SweepArgs),
    /// Train, evaluate and sweep k in one pass over the frames.
    Run(TrainArgs),
    /// Re-execute the command recorded in a run.json.
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    seed: u64,
    /// Scripted rallies of 500 frames each.
    #[arg(long, default_value_t = 6)]
    rallies: usize,
    /// Scene configuration JSON (replaces the scripted benchmark; --seed still applies).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    /// Lines of `u v X Y` (image pixels, court meters); `#` starts a comment.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct TrainArgs {
    /// Dataset directory as written by `synth`.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Pipeline configuration JSON; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Stage-1 feature mask such as hog,hof,rwpc,sc (repeatable; default: all 15 combinations).
    #[arg(long = "mask", value_name = "BLOCKS")]
    masks: Vec<String>,
    /// Kernel types: linear, rbf, polynomial, sigmoid.
    #[arg(long = "kernel", value_delimiter = ',', value_name = "KINDS")]
    kernels: Vec<String>,
    /// SVM cost values C.
    #[arg(long = "c", value_delimiter = ',', value_name = "C")]
    costs: Vec<f64>,
    /// Kernel parameter gamma values (absolute; default: relative to the mask size).
    #[arg(long = "gamma", value_delimiter = ',', value_name = "GAMMA")]
    gammas: Vec<f64>,
    /// AC window length k in frames.
    #[arg(long)]
    k: Option<usize>,
    /// Horizontal binning (across the court) of the SC and AC grids.
    #[arg(long)]
    grid_bx: Option<usize>,
    /// Vertical binning (along the court) of the SC and AC grids.
    #[arg(long)]
    grid_by: Option<usize>,
    /// Horizontal SC grid-point spacing in meters.
    #[arg(long)]
    grid_spacing_x: Option<f64>,
    /// Vertical SC grid-point spacing in meters.
    #[arg(long)]
    grid_spacing_y: Option<f64>,
    /// HOG/HOF cell size in pixels.
    #[arg(long)]
    cell_size: Option<usize>,
    /// HOG/HOF patch width in pixels.
    #[arg(long)]
    patch_w: Option<usize>,
    /// HOG/HOF patch height in pixels.
    #[arg(long)]
    patch_h: Option<usize>,
    /// HOG/HOF cells per block side.
    #[arg(long)]
    cells_per_block: Option<usize>,
    /// HOG/HOF orientation bins.
    #[arg(long)]
    bins: Option<usize>,
    /// AC window lengths for the k sweep (`run` only).
    #[arg(long, value_delimiter = ',', value_name = "K")]
    ks: Vec<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Model directory written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// AC window lengths in frames.
    #[arg(long, value_delimiter = ',', default_value = "10,20,40,80")]
    ks: Vec<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    /// run.json written by an earlier command.
    #[arg(long)]
    run: PathBuf,
    /// Output directory (default: the recorded one).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn require_dir(p: &Path, what: &str) -> Result<()> {
    if !p.is_dir() {
        bail!("{what} directory {} does not exist", p.display());
    }
    Ok(())
}

fn require_file(p: &Path, what: &str) -> Result<()> {
    if !p.is_file() {
        bail!("{what} file {} does not exist", p.display());
    }
    Ok(())
}

fn scene_config(a: &SynthArgs) -> Result<SceneConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            require_file(p, "scene config")?;
            load_scene_config(p).with_context(|| format!("reading {}", p.display()))?
        }
        None => {
            if a.rallies == 0 {
                bail!("--rallies must be at least 1");
            }
            SceneConfig::benchmark(a.seed, a.rallies)
        }
    };
    cfg.seed = a.seed;
    cfg.validate()?;
    Ok(cfg)
}

fn pipeline_config(a: &TrainArgs) -> Result<PipelineConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            require_file(p, "pipeline config")?;
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => PipelineConfig::default(),
    };
    cfg.seed = a.seed;
    if !a.masks.is_empty() {
        cfg.stage1.masks = a
            .masks
            .iter()
            .map(|m| m.parse::<FeatureMask>())
            .collect::<courtside::Result<_>>()?;
    }
    if !a.kernels.is_empty() {
        cfg.stage1.kernels = a
            .kernels
            .iter()
            .map(|k| k.parse::<KernelKind>())
            .collect::<courtside::Result<_>>()?;
    }
    if !a.costs.is_empty() {
        cfg.stage1.costs = a.costs.clone();
        cfg.stage2.costs = a.costs.clone();
    }
    if !a.gammas.is_empty() {
        cfg.stage1.gammas = GammaGrid::Absolute(a.gammas.clone());
        cfg.stage2.gammas = GammaGrid::Absolute(a.gammas.clone());
    }
    if let Some(k) = a.k {
        cfg.k = k;
    }
    if !a.ks.is_empty() {
        cfg.k_sweep = a.ks.clone();
    }
    if let Some(v) = a.grid_bx {
        cfg.grid_bx = v;
    }
    if let Some(v) = a.grid_by {
        cfg.grid_by = v;
    }
    if let Some(v) = a.grid_spacing_x {
        cfg.grid_spacing_x_m = v;
    }
    if let Some(v) = a.grid_spacing_y {
        cfg.grid_spacing_y_m = v;
    }
    if let Some(v) = a.cell_size {
        cfg.hog.cell = v;
    }
    if let Some(v) = a.patch_w {
        cfg.hog.patch_w = v;
    }
    if let Some(v) = a.patch_h {
        cfg.hog.patch_h = v;
    }
    if let Some(v) = a.cells_per_block {
        cfg.hog.cells_per_block = v;
    }
    if let Some(v) = a.bins {
        cfg.hog.bins = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn resolve(command: Command) -> Result<(Invocation, PathBuf)> {
    Ok(match command {
        Command::Synth(a) => (
            Invocation::Synth {
                scene: scene_config(&a)?,
            },
            a.out,
        ),
        Command::Calibrate(a) => {
            require_file(&a.pairs, "pairs")?;
            (Invocation::Calibrate { pairs: a.pairs }, a.out)
        }
        Command::Train(a) => {
            require_dir(&a.dataset, "dataset")?;
            let config = pipeline_config(&a)?;
            (
                Invocation::Train {
                    dataset: a.dataset,
                    config,
                },
                a.out,
            )
        }
        Command::Run(a) => {
            require_dir(&a.dataset, "dataset")?;
            let config = pipeline_config(&a)?;
            (
                Invocation::Run {
                    dataset: a.dataset,
                    config,
                },
                a.out,
            )
        }
        Command::Eval(a) => {
            require_dir(&a.model, "model")?;
            require_dir(&a.dataset, "dataset")?;
            (
                Invocation::Eval {
                    model: a.model,
                    dataset: a.dataset,
                },
                a.out,
            )
        }
        Command::SweepK(a) => {
            require_dir(&a.model, "model")?;
            require_dir(&a.dataset, "dataset")?;
            if a.ks.is_empty() || a.ks.contains(&0) {
                bail!("--ks needs positive window lengths");
            }
            (
                Invocation::SweepK {
                    model: a.model,
                    dataset: a.dataset,
                    ks: a.ks,
                },
                a.out,
            )
        }
        Command::Replay(a) => {
            require_file(&a.run, "run record")?;
            let rec = RunRecord::load(&a.run)?;
            let out = a.out.unwrap_or(rec.out.clone());
            (rec.invocation, out)
        }
    })
}

fn real_main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if n == 0 {
            bail!("--workers must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let argv: Vec<String> = std::env::args().collect();
    let (invocation, out) = resolve(cli.command)?;
    let invocation = invocation.absolutize()?;
    let record = RunRecord::new(argv, out.clone(), invocation);
    staging::with_staged_dir(&out, |dir| {
        record.invocation.execute(dir)?;
        record.save(&dir.join(invocation::RUN_FILE))
    })?;
    log::info!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
