use std::collections::BTreeSet;
use std::sync::OnceLock;

use courtside::classifier::{train_multiclass, GammaGrid, GridSpec, KernelKind, Sample, TrainConfig};
use courtside::features::{BlockKind, FeatureMask};
use courtside::pipeline::*;
use courtside::provenance::Provenance;
use courtside::synthgen::{generate, SceneConfig};

fn small_config(seed: u64) -> PipelineConfig {
    PipelineConfig {
        seed,
        stage1: GridSpec {
            masks: vec!["hog,rwpc".parse().unwrap(), "hog,sc".parse().unwrap()],
            kernels: vec![KernelKind::Rbf],
            costs: vec![1.0],
            gammas: GammaGrid::Relative(vec![1.0]),
            ..GridSpec::default()
        },
        k_sweep: vec![10, 40],
        ..PipelineConfig::default()
    }
}

fn dataset(seed: u64) -> Dataset {
    Dataset::from_scene(generate(&SceneConfig::benchmark(seed, 1)).unwrap()).unwrap()
}

struct Fixture {
    trained: TrainedPipeline,
    prep: Prepared,
    scores: Vec<FrameScores>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let (trained, prep, scores) = train(&dataset(7), &small_config(7)).unwrap();
        Fixture { trained, prep, scores }
    })
}

fn ids(samples: &[Sample]) -> Provenance {
    Provenance::from_ids(samples.iter().map(|s| s.id))
}

#[test]
fn samples_are_every_stride_th_frame_from_tracklet_start() {
    let ds = dataset(2);
    let interp = interpolate(&ds.keyframes).unwrap();
    let refs = select_samples(&interp, 5);
    let mut per: std::collections::BTreeMap<u32, Vec<usize>> = Default::default();
    for r in &refs {
        per.entry(r.tracklet).or_default().push(r.frame);
    }
    for (t, frames) in per {
        let start = interp
            .iter()
            .filter(|r| r.tracklet_id == t)
            .map(|r| r.frame_id)
            .min()
            .unwrap();
        let end = interp
            .iter()
            .filter(|r| r.tracklet_id == t)
            .map(|r| r.frame_id)
            .max()
            .unwrap();
        let expect: Vec<usize> = (start..=end).step_by(5).collect();
        assert_eq!(frames, expect, "tracklet {t}");
    }
    assert_eq!(select_samples(&interp, 1).len(), interp.len());
}

#[test]
fn interpolation_expands_keyframes_by_about_the_spacing() {
    let ds = dataset(3);
    let interp = interpolate(&ds.keyframes).unwrap();
    let ratio = interp.len() as f64 / ds.keyframes.len() as f64;
    // keyframes every 5 frames plus each tracklet's last frame
    assert!(interp.len() >= ds.keyframes.len());
    assert!((3.5..=5.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn fitted_objects_see_training_samples_only() {
    let f = fixture();
    let train = f.prep.train_samples();
    let test = f.prep.test_samples();
    let train_t: BTreeSet<u32> = train.iter().map(|s| s.tracklet).collect();
    assert!(test.iter().all(|s| !train_t.contains(&s.tracklet)));
    assert!(!test.is_empty());

    let p = ids(&train);
    let s1 = &f.trained.stage1;
    assert_eq!(s1.search.provenance, p);
    assert_eq!(s1.model.normalizer.provenance, p);
    assert_eq!(s1.model.training_provenance, p);
    assert_eq!(s1.model.calibration_provenance, p);
    let s2 = &f.trained.stage2;
    assert_eq!(s2.search.provenance, p);
    assert_eq!(s2.model.normalizer.provenance, p);
    assert_eq!(s2.model.calibration_provenance, p);

    for (j, m) in s1.cross.iter().enumerate() {
        let part: Vec<Sample> = train.iter().filter(|s| s1.fold_of[&s.tracklet] != j).cloned().collect();
        let fell_back = s1
            .warnings
            .iter()
            .any(|w| w.starts_with(&format!("cross-fit fold {j} ")));
        if fell_back {
            assert_eq!(m.normalizer.provenance, p);
        } else {
            assert_eq!(m.normalizer.provenance, ids(&part));
        }
    }

    let train_refs: Vec<SampleRef> = f
        .prep
        .refs
        .iter()
        .filter(|r| train_t.contains(&r.tracklet))
        .copied()
        .collect();
    let color = color_model_refs(&train_refs, &f.prep.config);
    assert!(!color.is_empty());
    assert!(color.iter().all(|r| train_t.contains(&r.tracklet)));
    assert_eq!(
        f.trained.segmenter.foreground.provenance,
        Provenance::from_ids(color.iter().map(|r| r.id))
    );
}

#[test]
fn store_round_trip_is_lossless() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    save_trained(&f.trained, dir.path()).unwrap();
    let back = load_trained(dir.path()).unwrap();
    assert_eq!(back, f.trained);
    let grid = std::fs::read_to_string(dir.path().join("stage1_grid.csv")).unwrap();
    assert!(grid.starts_with("kernel,C,gamma,mask,fold,macro_acc\n"));
}

#[test]
fn stored_pipeline_evaluates_like_the_in_memory_one() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    save_trained(&f.trained, dir.path()).unwrap();
    let loaded = load_trained(dir.path()).unwrap();
    let a = evaluate_prepared(&f.prep, &f.trained, &f.scores).unwrap();
    let b = evaluate_trained(&dataset(7), &loaded).unwrap();
    assert_eq!(a, b);
}

#[test]
fn all_zero_context_reproduces_stage_one() {
    let f = fixture();
    let m1 = &f.trained.stage1.model;
    let zero = |v: Vec<Sample>| -> Vec<Sample> {
        let n = f.prep.view.grid.bin_count() * 7;
        v.into_iter()
            .map(|mut s| {
                s.blocks.set(BlockKind::Ac, vec![0.0; n]);
                s
            })
            .collect()
    };
    let train = zero(f.prep.train_samples());
    let test = zero(f.prep.test_samples());
    let tc = TrainConfig {
        kernel: m1.kernel,
        c: m1.c,
        seed: f.prep.config.seed,
        calibration_folds: f.prep.config.calibration_folds,
        ..TrainConfig::default()
    };
    let with_ac = train_multiclass(&train, m1.mask().with(BlockKind::Ac), &tc).unwrap();
    let r1 = evaluate(m1, &test).unwrap();
    let r2 = evaluate(&with_ac, &test).unwrap();
    assert!((r1.macro7 - r2.macro7).abs() < 1e-9, "{} vs {}", r1.macro7, r2.macro7);
    assert_eq!(r1.confusion, r2.confusion);
}

#[test]
fn runs_are_deterministic_and_independent_of_worker_count() {
    let ds = dataset(11);
    let cfg = PipelineConfig {
        k_sweep: vec![10],
        ..small_config(11)
    };
    let a = run(&ds, &cfg).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| run(&ds, &cfg).unwrap());
    assert_eq!(a.evaluation, b.evaluation);
    assert_eq!(a.trained, b.trained);
    assert_eq!(k_sweep_csv(&a.k_sweep), k_sweep_csv(&b.k_sweep));
    assert_eq!(
        a.evaluation.stage2.to_json().unwrap(),
        b.evaluation.stage2.to_json().unwrap()
    );
}

#[test]
fn stage_two_mask_is_stage_one_plus_context() {
    let f = fixture();
    let m1: FeatureMask = f.trained.stage1.model.mask();
    assert_eq!(f.trained.stage2.model.mask(), m1.with(BlockKind::Ac));
    assert_eq!(f.trained.stage2.model.kernel.kind, f.trained.stage1.model.kernel.kind);
}
