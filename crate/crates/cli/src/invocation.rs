//! Fully resolved commands and the `run.json` record that replays them.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use courtside::geometry::{fit_homography, read_calibration};
use courtside::pipeline::{
    evaluate_trained, load_trained, run, save_trained, sweep_k_trained, train, write_evaluation, write_k_sweep,
    write_run, Dataset, PipelineConfig,
};
use courtside::synthgen::{emit_dataset, generate, SceneConfig};
use serde::{Deserialize, Serialize};

pub const RUN_FILE: &str = "run.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Invocation {
    Synth {
        scene: SceneConfig,
    },
    Calibrate {
        pairs: PathBuf,
    },
    Train {
        dataset: PathBuf,
        config: PipelineConfig,
    },
    Run {
        dataset: PathBuf,
        config: PipelineConfig,
    },
    Eval {
        model: PathBuf,
        dataset: PathBuf,
    },
    SweepK {
        model: PathBuf,
        dataset: PathBuf,
        ks: Vec<usize>,
    },
}

fn open_dataset(p: &Path) -> Result<Dataset> {
    Dataset::open(p).with_context(|| format!("opening dataset {}", p.display()))
}

impl Invocation {
    /// Input paths are made absolute so the record replays from any directory.
    pub fn absolutize(mut self) -> Result<Self> {
        let abs = |p: &mut PathBuf| -> Result<()> {
            *p = fs::canonicalize(&*p).with_context(|| format!("resolving {}", p.display()))?;
            Ok(())
        };
        match &mut self {
            Invocation::Synth { .. } => {}
            Invocation::Calibrate { pairs } => abs(pairs)?,
            Invocation::Train { dataset, .. } | Invocation::Run { dataset, .. } => abs(dataset)?,
            Invocation::Eval { model, dataset } | Invocation::SweepK { model, dataset, .. } => {
                abs(model)?;
                abs(dataset)?;
            }
        }
        Ok(self)
    }

    pub fn execute(&self, out: &Path) -> Result<()> {
        match self {
            Invocation::Synth { scene } => {
                let s = generate(scene)?;
                let m = emit_dataset(&s, out)?;
                log::info!(
                    "{} frames, {} annotations, {} tracklets",
                    m.frames,
                    m.annotations,
                    m.tracklets
                );
            }
            Invocation::Calibrate { pairs } => {
                let pts = read_calibration(pairs)?;
                let fit = fit_homography(&pts)?;
                fs::write(out.join("homography.txt"), fit.homography.to_text())?;
                let mut s = String::new();
                let _ = writeln!(s, "pairs {}\nrms_residual_m {:e}", pts.len(), fit.rms_residual);
                fs::write(out.join("residual.txt"), s)?;
                log::info!("rms residual {:.3e} m", fit.rms_residual);
            }
            Invocation::Train { dataset, config } => {
                let ds = open_dataset(dataset)?;
                let (trained, _, _) = train(&ds, config)?;
                save_trained(&trained, out)?;
                log::info!(
                    "stage 1 {} (cv macro-7 {:.2}); stage 2 {} (cv macro-7 {:.2})",
                    trained.stage1.search.best.mask,
                    trained.stage1.search.best_macro7,
                    trained.stage2.search.best.mask,
                    trained.stage2.search.best_macro7
                );
            }
            Invocation::Run { dataset, config } => {
                let ds = open_dataset(dataset)?;
                let r = run(&ds, config)?;
                write_run(&r, out)?;
                log::info!(
                    "test macro-5: stage 1 {:.2}, stage 2 {:.2}",
                    r.evaluation.stage1.macro5,
                    r.evaluation.stage2.macro5
                );
            }
            Invocation::Eval { model, dataset } => {
                let trained = load_trained(model).with_context(|| format!("loading model {}", model.display()))?;
                let e = evaluate_trained(&open_dataset(dataset)?, &trained)?;
                write_evaluation(&e, out)?;
                log::info!(
                    "test macro-5: stage 1 {:.2}, stage 2 {:.2}",
                    e.stage1.macro5,
                    e.stage2.macro5
                );
            }
            Invocation::SweepK { model, dataset, ks } => {
                let trained = load_trained(model).with_context(|| format!("loading model {}", model.display()))?;
                let rows = sweep_k_trained(&open_dataset(dataset)?, &trained, ks)?;
                write_k_sweep(&rows, out)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub version: String,
    pub argv: Vec<String>,
    pub out: PathBuf,
    pub invocation: Invocation,
}

impl RunRecord {
    pub fn new(argv: Vec<String>, out: PathBuf, invocation: Invocation) -> Self {
        RunRecord {
            version: env!("CARGO_PKG_VERSION").to_string(),
            argv,
            out,
            invocation,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?).with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
