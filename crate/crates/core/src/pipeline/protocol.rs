//! The two-stage protocol: frame analysis, stage-1 training, AC scoring,
//! stage-2 training and evaluation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::annotations::{interpolate, load_annotations, split_by_tracklet, AnnotationRecord, Split};
use super::config::PipelineConfig;
use super::report::{evaluate, EvaluationReport};
use super::source::{DirSource, FrameSource};
use crate::activity::Activity;
use crate::classifier::{
    grid_search, stratified_group_folds, train_multiclass, GridResult, MulticlassModel, Sample, SearchConfig,
    TrainConfig,
};
use crate::context::{ac_descriptor, ScSampler, ScoredDetection};
use crate::error::{Error, Result};
use crate::features::{hof_block, hog_block, rwpc, BlockKind, BlockSet};
use crate::geometry::{
    fit_homography, make_grid_xy, read_calibration, Correspondence, CourtGrid, CourtModel, Homography, ImageRect,
};
use crate::provenance::Provenance;
use crate::raster::{Frame, GrayImage};
use crate::segmentation::{
    build_background, dynamic_similarity, fit_gmm, gmm_likelihood, localize_players, player_probability,
    BackgroundModel, ColorModel, ColorRole, PlayerDetection, ProbabilityMap,
};
use crate::synthgen::{self, Scene};

const CROSS_FIT_SALT: u64 = 0x0c0f_f17e_5a17_0001;
const CHUNK: usize = 16;

/// Frames, keyframe annotations and calibration of one sequence.
pub struct Dataset {
    pub frames: Box<dyn FrameSource>,
    pub keyframes: Vec<AnnotationRecord>,
    pub calibration: Vec<Correspondence>,
    pub homography: Homography,
    pub court: CourtModel,
}

impl Dataset {
    pub fn new(
        frames: Box<dyn FrameSource>,
        keyframes: Vec<AnnotationRecord>,
        calibration: Vec<Correspondence>,
        court: CourtModel,
    ) -> Result<Self> {
        let homography = fit_homography(&calibration)?.homography;
        let (w, h) = frames.dims();
        for r in &keyframes {
            let b = &r.bbox;
            let inside = b.x >= 0.0 && b.y >= 0.0 && b.x + b.w <= w as f64 + 1e-6 && b.y + b.h <= h as f64 + 1e-6;
            if r.frame_id >= frames.len() || !inside {
                return Err(Error::Format(format!(
                    "annotation of tracklet {} at frame {} lies outside the sequence",
                    r.tracklet_id, r.frame_id
                )));
            }
        }
        Ok(Dataset {
            frames,
            keyframes,
            calibration,
            homography,
            court,
        })
    }

    /// A directory as written by `synthgen::emit_dataset`; the court comes
    /// from `scene.json` when present.
    pub fn open(dir: &Path) -> Result<Self> {
        let frames = DirSource::open(&dir.join(synthgen::FRAMES_DIR))?;
        let keyframes = load_annotations(&dir.join(synthgen::ANNOTATIONS_FILE))?;
        let calibration = read_calibration(&dir.join(synthgen::CALIBRATION_FILE))?;
        let scene = dir.join(synthgen::SCENE_FILE);
        let court = if scene.is_file() {
            synthgen::load_scene_config(&scene)?.court
        } else {
            CourtModel::default()
        };
        Dataset::new(Box::new(frames), keyframes, calibration, court)
    }

    /// The same inputs `emit_dataset` would write, kept in memory.
    pub fn from_scene(scene: Scene) -> Result<Self> {
        let keyframes = scene.annotations();
        let calibration = scene.camera.landmarks(&scene.config.court);
        let court = scene.config.court;
        Dataset::new(Box::new(scene), keyframes, calibration, court)
    }
}

/// One annotated player-frame used as a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRef {
    /// Index into the interpolated annotation list.
    pub id: u64,
    pub frame: usize,
    pub tracklet: u32,
    pub label: Activity,
    pub bbox: ImageRect,
}

/// Every `stride`-th interpolated frame of each tracklet, counted from its
/// first annotated frame.
pub fn select_samples(interpolated: &[AnnotationRecord], stride: usize) -> Vec<SampleRef> {
    let mut first: BTreeMap<u32, usize> = BTreeMap::new();
    for r in interpolated {
        let e = first.entry(r.tracklet_id).or_insert(r.frame_id);
        *e = (*e).min(r.frame_id);
    }
    interpolated
        .iter()
        .enumerate()
        .filter(|(_, r)| (r.frame_id - first[&r.tracklet_id]) % stride.max(1) == 0)
        .map(|(i, r)| SampleRef {
            id: i as u64,
            frame: r.frame_id,
            tracklet: r.tracklet_id,
            label: r.class,
            bbox: r.bbox,
        })
        .collect()
}

/// Background image plus the two color models.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmenter {
    pub background: BackgroundModel,
    pub foreground: ColorModel,
    pub floor: ColorModel,
}

impl Segmenter {
    pub fn player_map(&self, f: &Frame) -> Result<ProbabilityMap> {
        let dy = dynamic_similarity(&self.background, f)?;
        player_probability(
            &gmm_likelihood(&self.foreground, f),
            &gmm_likelihood(&self.floor, f),
            &dy,
        )
    }
}

fn evenly(n: usize, m: usize) -> Vec<usize> {
    if m >= n {
        return (0..n).collect();
    }
    if m <= 1 {
        return vec![0];
    }
    let mut v: Vec<usize> = (0..m).map(|i| i * (n - 1) / (m - 1)).collect();
    v.dedup();
    v
}

fn thin<T: Copy>(v: &[T], m: usize) -> Vec<T> {
    evenly(v.len(), m).into_iter().map(|i| v[i]).collect()
}

/// Training samples whose boxes feed the foreground color model.
pub fn color_model_refs(train: &[SampleRef], cfg: &PipelineConfig) -> Vec<SampleRef> {
    let frames: Vec<usize> = train
        .iter()
        .map(|r| r.frame)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let chosen: BTreeSet<usize> = thin(&frames, cfg.gmm_frames).into_iter().collect();
    train.iter().filter(|r| chosen.contains(&r.frame)).copied().collect()
}

/// Median background from evenly spaced frames; the foreground model from
/// dynamic pixels inside training boxes; the floor model from the background.
pub fn fit_segmenter(ds: &Dataset, cfg: &PipelineConfig, train: &[SampleRef]) -> Result<Segmenter> {
    let n = ds.frames.len();
    let bg_idx = evenly(n, cfg.background_frames);
    let frames = bg_idx
        .par_iter()
        .map(|&i| ds.frames.frame(i))
        .collect::<Result<Vec<Frame>>>()?;
    let background = build_background(&frames)?;
    drop(frames);

    let refs = color_model_refs(train, cfg);
    let mut by_frame: BTreeMap<usize, Vec<&SampleRef>> = BTreeMap::new();
    for r in &refs {
        by_frame.entry(r.frame).or_default().push(r);
    }
    let groups: Vec<(usize, Vec<&SampleRef>)> = by_frame.into_iter().collect();
    let fg_pixels: Vec<Vec<[f64; 3]>> = groups
        .par_iter()
        .map(|(f, rs)| {
            let frame = ds.frames.frame(*f)?;
            let dy = dynamic_similarity(&background, &frame)?;
            let mut px = Vec::new();
            for r in rs {
                let b = r.bbox.pixel_bounds().clip(frame.width(), frame.height());
                for y in b.y0 as usize..b.y1 as usize {
                    for x in b.x0 as usize..b.x1 as usize {
                        if dy.get(x, y) > cfg.dyn_threshold {
                            px.push(frame.get(x, y).map(f64::from));
                        }
                    }
                }
            }
            Ok(px)
        })
        .collect::<Result<_>>()?;
    let fg_pixels = thin(&fg_pixels.concat(), cfg.gmm_samples);
    let floor_pixels: Vec<[f64; 3]> = background.image.pixels().iter().map(|p| p.map(f64::from)).collect();
    let floor_pixels = thin(&floor_pixels, cfg.gmm_samples);

    let mut foreground = fit_gmm(&fg_pixels, ColorRole::Foreground, &cfg.gmm, cfg.seed)?.model;
    foreground.provenance = Provenance::from_ids(refs.iter().map(|r| r.id));
    // background frames are unlabeled; no annotated sample feeds this model
    let mut floor = fit_gmm(&floor_pixels, ColorRole::Background, &cfg.gmm, cfg.seed.wrapping_add(1))?.model;
    floor.provenance = Provenance::default();
    Ok(Segmenter {
        background,
        foreground,
        floor,
    })
}

/// Calibrated view: homography, court grid and the SC sampler.
#[derive(Debug, Clone)]
pub struct View {
    pub homography: Homography,
    pub court: CourtModel,
    pub grid: CourtGrid,
    pub sampler: ScSampler,
}

impl View {
    pub fn new(ds: &Dataset, cfg: &PipelineConfig) -> Result<Self> {
        let grid = make_grid_xy(
            &ds.court,
            cfg.grid_spacing_x_m,
            cfg.grid_spacing_y_m,
            cfg.grid_bx,
            cfg.grid_by,
        )?;
        let sampler = ScSampler::new(&ds.homography, &grid, cfg.player)?;
        Ok(View {
            homography: ds.homography.clone(),
            court: ds.court,
            grid,
            sampler,
        })
    }
}

/// Per-frame results of the player map.
#[derive(Debug, Clone)]
pub struct FrameData {
    pub sc: Vec<f64>,
    pub detections: Vec<PlayerDetection>,
    /// HOG, HOF and RWPC of each detection's blob box.
    pub blocks: Vec<BlockSet>,
}

#[derive(Debug, Clone, Default)]
pub struct Analysis {
    pub frames: BTreeMap<usize, FrameData>,
    /// Stage-1 blocks of each analyzed sample, by sample id.
    pub samples: BTreeMap<u64, Sample>,
}

fn patch_blocks(
    prev: &GrayImage,
    cur: &GrayImage,
    rect: &ImageRect,
    view: &View,
    cfg: &PipelineConfig,
) -> Result<BlockSet> {
    let mut b = BlockSet::default();
    b.set(BlockKind::Hog, hog_block(cur, rect, &cfg.hog)?);
    b.set(BlockKind::Hof, hof_block(prev, cur, rect, &cfg.hog, &cfg.flow)?);
    b.set(BlockKind::Rwpc, rwpc(&view.homography, rect, &view.court)?.to_vec());
    Ok(b)
}

/// Consecutive runs of `frames`, cut into pieces of at most `CHUNK`.
fn chunks(frames: &BTreeSet<usize>) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for &f in frames {
        match out.last_mut() {
            Some(c) if c.len() < CHUNK && *c.last().unwrap() + 1 == f => c.push(f),
            _ => out.push(vec![f]),
        }
    }
    out
}

/// Player maps, SC, detections and descriptor blocks for `frames`, plus the
/// stage-1 blocks of every sample in `refs` (whose frames must be included).
pub fn analyze(
    ds: &Dataset,
    cfg: &PipelineConfig,
    view: &View,
    seg: &Segmenter,
    refs: &[SampleRef],
    frames: &BTreeSet<usize>,
) -> Result<Analysis> {
    let mut at: BTreeMap<usize, Vec<&SampleRef>> = BTreeMap::new();
    for r in refs {
        if !frames.contains(&r.frame) {
            return Err(Error::InsufficientData(format!(
                "sample frame {} not analyzed",
                r.frame
            )));
        }
        at.entry(r.frame).or_default().push(r);
    }
    type ChunkOut = Vec<(usize, FrameData, Vec<Sample>)>;
    let parts: Vec<ChunkOut> = chunks(frames)
        .par_iter()
        .map(|chunk| {
            let mut out = Vec::with_capacity(chunk.len());
            let mut prev: Option<(usize, GrayImage)> = None;
            for &f in chunk {
                let frame = ds.frames.frame(f)?;
                let gray = frame.gray();
                let prev_gray = match prev.take() {
                    Some((pf, g)) if pf + 1 == f => g,
                    _ if f > 0 => ds.frames.frame(f - 1)?.gray(),
                    _ => gray.clone(),
                };
                let p = seg.player_map(&frame)?;
                let sc = view.sampler.descriptor(&p).values;
                let detections = localize_players(&p, &view.homography, &view.court, &cfg.localize);
                let blocks = detections
                    .iter()
                    .map(|d| patch_blocks(&prev_gray, &gray, &d.image_blob, view, cfg))
                    .collect::<Result<Vec<_>>>()?;
                let mut samples = Vec::new();
                for r in at.get(&f).into_iter().flatten() {
                    let mut b = patch_blocks(&prev_gray, &gray, &r.bbox, view, cfg)?;
                    b.set(BlockKind::Sc, sc.clone());
                    samples.push(Sample {
                        id: r.id,
                        tracklet: r.tracklet,
                        label: r.label,
                        blocks: b,
                    });
                }
                out.push((f, FrameData { sc, detections, blocks }, samples));
                prev = Some((f, gray));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut an = Analysis::default();
    for (f, data, samples) in parts.into_iter().flatten() {
        an.frames.insert(f, data);
        for s in samples {
            an.samples.insert(s.id, s);
        }
    }
    Ok(an)
}

/// Calibrated stage-1 scores of every detection, by frame.
pub type FrameScores = BTreeMap<usize, Vec<[f64; Activity::COUNT]>>;

pub fn score_frames(an: &Analysis, model: &MulticlassModel) -> Result<FrameScores> {
    let mask = model.mask();
    let frames: Vec<(&usize, &FrameData)> = an.frames.iter().collect();
    let scored = frames
        .par_iter()
        .map(|(f, d)| {
            let s = d
                .blocks
                .iter()
                .map(|b| {
                    let mut x = BlockSet::default();
                    for k in mask.blocks() {
                        let v = if k == BlockKind::Sc { Some(&d.sc) } else { b.get(k) };
                        if let Some(v) = v {
                            x.set(k, v.clone());
                        }
                    }
                    model.predict_scores(&x)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((**f, s))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(scored.into_iter().collect())
}

/// AC over the `k` frames strictly before `frame`.
pub fn ac_block(an: &Analysis, scores: &FrameScores, grid: &CourtGrid, frame: usize, k: usize) -> Result<Vec<f64>> {
    let history: Vec<Vec<ScoredDetection>> = (frame.saturating_sub(k)..frame)
        .map(|g| match (an.frames.get(&g), scores.get(&g)) {
            (Some(d), Some(s)) => d
                .detections
                .iter()
                .zip(s)
                .map(|(det, sc)| ScoredDetection {
                    detection: det.clone(),
                    scores: *sc,
                })
                .collect(),
            _ => Vec::new(),
        })
        .collect();
    Ok(ac_descriptor(&history, grid, k)?.flatten())
}

/// Copies of `samples` with the AC block attached; `model_of` picks which
/// entry of `scores` each sample's AC is built from.
pub fn with_ac(
    samples: &[Sample],
    frame_of: &BTreeMap<u64, usize>,
    model_of: impl Fn(&Sample) -> usize + Sync,
    scores: &[FrameScores],
    an: &Analysis,
    grid: &CourtGrid,
    k: usize,
) -> Result<Vec<Sample>> {
    samples
        .par_iter()
        .map(|s| {
            let mut s = s.clone();
            let f = frame_of[&s.id];
            s.blocks
                .set(BlockKind::Ac, ac_block(an, &scores[model_of(&s)], grid, f, k)?);
            Ok(s)
        })
        .collect()
}

pub fn train_config(cfg: &PipelineConfig, spec: &crate::classifier::GridSpec, best: &SearchConfig) -> TrainConfig {
    TrainConfig {
        kernel: best.kernel,
        c: best.c,
        tol: spec.tol,
        class_weights: spec.class_weights,
        calibration_folds: cfg.calibration_folds,
        seed: cfg.seed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1 {
    pub search: GridResult,
    pub model: MulticlassModel,
    /// `cross[j]` is trained without cross-fit fold `j`.
    pub cross: Vec<MulticlassModel>,
    /// Cross-fit fold of every training tracklet.
    pub fold_of: BTreeMap<u32, usize>,
    pub warnings: Vec<String>,
}

pub fn train_stage1(train: &[Sample], cfg: &PipelineConfig) -> Result<Stage1> {
    let search = grid_search(train, &cfg.stage1, cfg.seed)?;
    let tc = train_config(cfg, &cfg.stage1, &search.best);
    let model = train_multiclass(train, search.best.mask, &tc)?;
    let labels: Vec<Activity> = train.iter().map(|s| s.label).collect();
    let groups: Vec<u32> = train.iter().map(|s| s.tracklet).collect();
    let folds = stratified_group_folds(&labels, &groups, cfg.cross_fit_folds, cfg.seed ^ CROSS_FIT_SALT);
    let fold_of: BTreeMap<u32, usize> = groups.iter().copied().zip(folds.iter().copied()).collect();
    let mut warnings = Vec::new();
    let mut cross = Vec::with_capacity(cfg.cross_fit_folds);
    for j in 0..cfg.cross_fit_folds {
        let part: Vec<Sample> = train
            .iter()
            .zip(&folds)
            .filter(|(_, &f)| f != j)
            .map(|(s, _)| s.clone())
            .collect();
        match train_multiclass(&part, search.best.mask, &tc) {
            Ok(m) => cross.push(m),
            Err(Error::MissingClass(c)) => {
                let msg = format!("cross-fit fold {j} lacks class {c}; its samples are scored by the full model");
                log::warn!("{msg}");
                warnings.push(msg);
                cross.push(model.clone());
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Stage1 {
        search,
        model,
        cross,
        fold_of,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage2 {
    pub k: usize,
    pub search: GridResult,
    pub model: MulticlassModel,
}

pub fn train_stage2(train: &[Sample], stage1: &Stage1, cfg: &PipelineConfig, k: usize) -> Result<Stage2> {
    let mut spec = cfg.stage2.clone();
    spec.masks = if cfg.stage2_full_search {
        cfg.stage1.masks.iter().map(|m| m.with(BlockKind::Ac)).collect()
    } else {
        vec![stage1.model.mask().with(BlockKind::Ac)]
    };
    if spec.kernels.is_empty() {
        spec.kernels = vec![stage1.model.kernel.kind];
    }
    let search = grid_search(train, &spec, cfg.seed)?;
    let model = train_multiclass(train, search.best.mask, &train_config(cfg, &spec, &search.best))?;
    Ok(Stage2 { k, search, model })
}

/// Everything fitted on the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPipeline {
    pub config: PipelineConfig,
    pub split: Split,
    pub segmenter: Segmenter,
    pub stage1: Stage1,
    pub stage2: Stage2,
}

/// Analyzed frames and samples shared by training, evaluation and the k sweep.
pub struct Prepared {
    pub config: PipelineConfig,
    pub keyframe_count: usize,
    pub interpolated: Vec<AnnotationRecord>,
    pub split: Split,
    pub refs: Vec<SampleRef>,
    pub view: View,
    pub segmenter: Segmenter,
    pub analysis: Analysis,
    pub frame_of: BTreeMap<u64, usize>,
}

impl Prepared {
    fn samples(&self, train: bool) -> Vec<Sample> {
        self.analysis
            .samples
            .values()
            .filter(|s| self.split.is_train(s.tracklet) == train)
            .cloned()
            .collect()
    }

    pub fn train_samples(&self) -> Vec<Sample> {
        self.samples(true)
    }

    pub fn test_samples(&self) -> Vec<Sample> {
        self.samples(false)
    }
}

/// Interpolates, splits, fits the segmenter (unless given) and analyzes the
/// frames needed by the chosen samples and their AC windows.
pub fn prepare(
    ds: &Dataset,
    cfg: &PipelineConfig,
    fitted: Option<(Split, Segmenter)>,
    include_train: bool,
) -> Result<Prepared> {
    cfg.validate()?;
    let interpolated = interpolate(&ds.keyframes)?;
    let refs = select_samples(&interpolated, cfg.sample_stride);
    let (split, segmenter) = match fitted {
        Some(f) => f,
        None => {
            let split = split_by_tracklet(&interpolated, cfg.split_ratio, cfg.seed)?;
            let train: Vec<SampleRef> = refs.iter().filter(|r| split.is_train(r.tracklet)).copied().collect();
            let seg = fit_segmenter(ds, cfg, &train)?;
            (split, seg)
        }
    };
    let chosen: Vec<SampleRef> = refs
        .iter()
        .filter(|r| include_train || !split.is_train(r.tracklet))
        .copied()
        .collect();
    let kmax = cfg.max_k();
    let mut frames = BTreeSet::new();
    for r in &chosen {
        frames.extend(r.frame.saturating_sub(kmax)..=r.frame);
    }
    let view = View::new(ds, cfg)?;
    let analysis = analyze(ds, cfg, &view, &segmenter, &chosen, &frames)?;
    Ok(Prepared {
        config: cfg.clone(),
        keyframe_count: ds.keyframes.len(),
        frame_of: refs.iter().map(|r| (r.id, r.frame)).collect(),
        interpolated,
        split,
        refs,
        view,
        segmenter,
        analysis,
    })
}

/// Scores from the full stage-1 model followed by each cross-fit model.
pub fn score_all(prep: &Prepared, stage1: &Stage1) -> Result<Vec<FrameScores>> {
    let full = score_frames(&prep.analysis, &stage1.model)?;
    let mut out = vec![full];
    for m in &stage1.cross {
        out.push(if *m == stage1.model {
            out[0].clone()
        } else {
            score_frames(&prep.analysis, m)?
        });
    }
    Ok(out)
}

fn train_with_ac(prep: &Prepared, stage1: &Stage1, scores: &[FrameScores], k: usize) -> Result<Vec<Sample>> {
    let model_of = |s: &Sample| 1 + stage1.fold_of.get(&s.tracklet).copied().unwrap_or(0);
    with_ac(
        &prep.train_samples(),
        &prep.frame_of,
        model_of,
        scores,
        &prep.analysis,
        &prep.view.grid,
        k,
    )
}

fn test_with_ac(prep: &Prepared, scores: &[FrameScores], k: usize) -> Result<Vec<Sample>> {
    with_ac(
        &prep.test_samples(),
        &prep.frame_of,
        |_| 0,
        scores,
        &prep.analysis,
        &prep.view.grid,
        k,
    )
}

pub fn train(ds: &Dataset, cfg: &PipelineConfig) -> Result<(TrainedPipeline, Prepared, Vec<FrameScores>)> {
    let prep = prepare(ds, cfg, None, true)?;
    let train1 = prep.train_samples();
    log::info!("stage 1: {} training samples", train1.len());
    let stage1 = train_stage1(&train1, cfg)?;
    let scores = score_all(&prep, &stage1)?;
    let train2 = train_with_ac(&prep, &stage1, &scores, cfg.k)?;
    log::info!("stage 2: k = {}", cfg.k);
    let stage2 = train_stage2(&train2, &stage1, cfg, cfg.k)?;
    let trained = TrainedPipeline {
        config: cfg.clone(),
        split: prep.split.clone(),
        segmenter: prep.segmenter.clone(),
        stage1,
        stage2,
    };
    Ok((trained, prep, scores))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub stage1: EvaluationReport,
    pub stage2: EvaluationReport,
}

/// Test-split reports; `scores[0]` must come from the full stage-1 model.
pub fn evaluate_prepared(prep: &Prepared, trained: &TrainedPipeline, scores: &[FrameScores]) -> Result<Evaluation> {
    let test1 = prep.test_samples();
    let stage1 = evaluate(&trained.stage1.model, &test1)?;
    let test2 = test_with_ac(prep, scores, trained.stage2.k)?;
    let stage2 = evaluate(&trained.stage2.model, &test2)?;
    Ok(Evaluation { stage1, stage2 })
}

/// Evaluates a stored pipeline; only test samples and their AC windows are analyzed.
pub fn evaluate_trained(ds: &Dataset, trained: &TrainedPipeline) -> Result<Evaluation> {
    let cfg = PipelineConfig {
        k_sweep: Vec::new(),
        k: trained.stage2.k,
        ..trained.config.clone()
    };
    let prep = prepare(
        ds,
        &cfg,
        Some((trained.split.clone(), trained.segmenter.clone())),
        false,
    )?;
    let scores = vec![score_frames(&prep.analysis, &trained.stage1.model)?];
    evaluate_prepared(&prep, trained, &scores)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSweepRow {
    pub k: usize,
    pub config: SearchConfig,
    pub macro7: f64,
    pub macro5: f64,
}

/// Retrains and evaluates stage 2 for every `k`; analysis must include
/// training samples and windows of the largest `k`.
pub fn sweep_k(prep: &Prepared, stage1: &Stage1, scores: &[FrameScores], ks: &[usize]) -> Result<Vec<KSweepRow>> {
    ks.iter()
        .map(|&k| {
            let train2 = train_with_ac(prep, stage1, scores, k)?;
            let stage2 = train_stage2(&train2, stage1, &prep.config, k)?;
            let report = evaluate(&stage2.model, &test_with_ac(prep, scores, k)?)?;
            log::info!("k = {k}: macro-7 {:.2}, macro-5 {:.2}", report.macro7, report.macro5);
            Ok(KSweepRow {
                k,
                config: stage2.search.best,
                macro7: report.macro7,
                macro5: report.macro5,
            })
        })
        .collect()
}

/// Re-analyzes a dataset for a stored pipeline and sweeps `ks`.
pub fn sweep_k_trained(ds: &Dataset, trained: &TrainedPipeline, ks: &[usize]) -> Result<Vec<KSweepRow>> {
    let cfg = PipelineConfig {
        k_sweep: ks.to_vec(),
        ..trained.config.clone()
    };
    let prep = prepare(ds, &cfg, Some((trained.split.clone(), trained.segmenter.clone())), true)?;
    let scores = score_all(&prep, &trained.stage1)?;
    sweep_k(&prep, &trained.stage1, &scores, ks)
}

/// Counts describing the data a run used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub keyframes: usize,
    pub interpolated: usize,
    pub samples_train: usize,
    pub samples_test: usize,
    pub tracklets_train: usize,
    pub tracklets_test: usize,
    pub analyzed_frames: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub trained: TrainedPipeline,
    pub evaluation: Evaluation,
    pub k_sweep: Vec<KSweepRow>,
    pub data: DataSummary,
}

/// Train, evaluate and sweep `k` in one pass over the frames.
pub fn run(ds: &Dataset, cfg: &PipelineConfig) -> Result<RunResult> {
    let (trained, prep, scores) = train(ds, cfg)?;
    let evaluation = evaluate_prepared(&prep, &trained, &scores)?;
    let k_sweep = sweep_k(&prep, &trained.stage1, &scores, &cfg.k_sweep)?;
    let data = DataSummary {
        keyframes: prep.keyframe_count,
        interpolated: prep.interpolated.len(),
        samples_train: prep.train_samples().len(),
        samples_test: prep.test_samples().len(),
        tracklets_train: prep.split.train.len(),
        tracklets_test: prep.split.test.len(),
        analyzed_frames: prep.analysis.frames.len(),
    };
    Ok(RunResult {
        trained,
        evaluation,
        k_sweep,
        data,
    })
}
