//! Reading and writing pipeline artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::annotations::Split;
use super::config::PipelineConfig;
use super::protocol::{Evaluation, KSweepRow, RunResult, Segmenter, Stage1, Stage2, TrainedPipeline};
use crate::classifier::{GridResult, MulticlassModel};
use crate::error::{Error, Result};
use crate::raster::{encode_ppm, read_ppm, write_bytes};
use crate::segmentation::{BackgroundModel, ColorModel};

#[derive(Serialize, Deserialize)]
struct PipelineFile {
    config: PipelineConfig,
    split: Split,
    cross_fit_folds: usize,
    fold_of: BTreeMap<u32, usize>,
    warnings: Vec<String>,
    stage2_k: usize,
}

#[derive(Serialize, Deserialize)]
struct ColorModels {
    foreground: ColorModel,
    floor: ColorModel,
}

fn put(dir: &Path, name: &str, text: &str) -> Result<()> {
    write_bytes(&dir.join(name), text.as_bytes())
}

fn get(dir: &Path, name: &str) -> Result<String> {
    let p = dir.join(name);
    fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
}

fn mkdir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn save_trained(t: &TrainedPipeline, dir: &Path) -> Result<()> {
    mkdir(dir)?;
    let meta = PipelineFile {
        config: t.config.clone(),
        split: t.split.clone(),
        cross_fit_folds: t.stage1.cross.len(),
        fold_of: t.stage1.fold_of.clone(),
        warnings: t.stage1.warnings.clone(),
        stage2_k: t.stage2.k,
    };
    put(dir, "pipeline.json", &serde_json::to_string_pretty(&meta)?)?;
    let colors = ColorModels {
        foreground: t.segmenter.foreground.clone(),
        floor: t.segmenter.floor.clone(),
    };
    put(dir, "color_models.json", &serde_json::to_string_pretty(&colors)?)?;
    write_bytes(&dir.join("background.ppm"), &encode_ppm(&t.segmenter.background.image))?;
    put(dir, "stage1_model.json", &t.stage1.model.to_json()?)?;
    for (j, m) in t.stage1.cross.iter().enumerate() {
        put(dir, &format!("stage1_cross_{j}.json"), &m.to_json()?)?;
    }
    put(dir, "stage1_search.json", &serde_json::to_string(&t.stage1.search)?)?;
    put(dir, "stage1_grid.csv", &t.stage1.search.to_csv())?;
    put(dir, "stage2_model.json", &t.stage2.model.to_json()?)?;
    put(dir, "stage2_search.json", &serde_json::to_string(&t.stage2.search)?)?;
    put(dir, "stage2_grid.csv", &t.stage2.search.to_csv())?;
    Ok(())
}

pub fn load_trained(dir: &Path) -> Result<TrainedPipeline> {
    let meta: PipelineFile = serde_json::from_str(&get(dir, "pipeline.json")?)?;
    let colors: ColorModels = serde_json::from_str(&get(dir, "color_models.json")?)?;
    let background = BackgroundModel {
        image: read_ppm(&dir.join("background.ppm"))?,
    };
    let cross = (0..meta.cross_fit_folds)
        .map(|j| MulticlassModel::from_json(&get(dir, &format!("stage1_cross_{j}.json"))?))
        .collect::<Result<Vec<_>>>()?;
    let search1: GridResult = serde_json::from_str(&get(dir, "stage1_search.json")?)?;
    let search2: GridResult = serde_json::from_str(&get(dir, "stage2_search.json")?)?;
    Ok(TrainedPipeline {
        config: meta.config,
        split: meta.split,
        segmenter: Segmenter {
            background,
            foreground: colors.foreground,
            floor: colors.floor,
        },
        stage1: Stage1 {
            search: search1,
            model: MulticlassModel::from_json(&get(dir, "stage1_model.json")?)?,
            cross,
            fold_of: meta.fold_of,
            warnings: meta.warnings,
        },
        stage2: Stage2 {
            k: meta.stage2_k,
            search: search2,
            model: MulticlassModel::from_json(&get(dir, "stage2_model.json")?)?,
        },
    })
}

pub fn write_evaluation(e: &Evaluation, dir: &Path) -> Result<()> {
    mkdir(dir)?;
    for (name, r) in [("stage1", &e.stage1), ("stage2", &e.stage2)] {
        put(dir, &format!("{name}_confusion.csv"), &r.to_csv())?;
        put(dir, &format!("{name}_report.json"), &r.to_json()?)?;
        put(dir, &format!("{name}_accuracy.svg"), &r.to_svg())?;
    }
    Ok(())
}

pub fn k_sweep_csv(rows: &[KSweepRow]) -> String {
    let mut s = String::from("k,kernel,C,gamma,macro_acc,macro5_acc\n");
    for r in rows {
        let g = if r.config.kernel.kind.uses_gamma() {
            r.config.kernel.gamma
        } else {
            0.0
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.k,
            r.config.kernel.kind.name(),
            r.config.c,
            g,
            r.macro7,
            r.macro5
        );
    }
    s
}

pub fn write_k_sweep(rows: &[KSweepRow], dir: &Path) -> Result<()> {
    mkdir(dir)?;
    put(dir, "k_sweep.csv", &k_sweep_csv(rows))
}

#[derive(Serialize)]
struct Summary<'a> {
    data: &'a super::protocol::DataSummary,
    stage1_best: &'a crate::classifier::SearchConfig,
    stage1_cv_macro7: f64,
    stage2_best: &'a crate::classifier::SearchConfig,
    stage2_cv_macro7: f64,
    stage1_macro7: f64,
    stage1_macro5: f64,
    stage2_macro7: f64,
    stage2_macro5: f64,
    k_sweep: &'a [KSweepRow],
}

/// Models, reports and `summary.json` for a full run.
pub fn write_run(r: &RunResult, dir: &Path) -> Result<()> {
    save_trained(&r.trained, dir)?;
    write_evaluation(&r.evaluation, dir)?;
    write_k_sweep(&r.k_sweep, dir)?;
    let s = Summary {
        data: &r.data,
        stage1_best: &r.trained.stage1.search.best,
        stage1_cv_macro7: r.trained.stage1.search.best_macro7,
        stage2_best: &r.trained.stage2.search.best,
        stage2_cv_macro7: r.trained.stage2.search.best_macro7,
        stage1_macro7: r.evaluation.stage1.macro7,
        stage1_macro5: r.evaluation.stage1.macro5,
        stage2_macro7: r.evaluation.stage2.macro7,
        stage2_macro5: r.evaluation.stage2.macro5,
        k_sweep: &r.k_sweep,
    };
    put(dir, "summary.json", &serde_json::to_string_pretty(&s)?)
}
