use super::*;
use crate::pipeline::load_annotations;
use crate::segmentation::build_background;

fn small(frames: usize, script: Vec<ScriptStep>) -> SceneConfig {
    SceneConfig {
        seed: 11,
        frames,
        width: 160,
        height: 120,
        camera: CameraConfig {
            focal_px: 320.0 / 3.0,
            ..CameraConfig::default()
        },
        script,
        ..SceneConfig::default()
    }
}

fn step(
    player: usize,
    activity: Activity,
    start: usize,
    duration: usize,
    law: PositionLaw,
    motion: Motion,
) -> ScriptStep {
    ScriptStep {
        player,
        activity,
        start,
        duration,
        law,
        motion,
        annotate: true,
    }
}

#[test]
fn same_seed_same_bytes() {
    let cfg = small(6, vec![step(3, Activity::Attack, 1, 4, laws::ATTACK, Motion::Jump)]);
    let (a, b) = (generate(&cfg).unwrap(), generate(&cfg).unwrap());
    for i in 0..6 {
        assert_eq!(a.render(i).to_rgb8(), b.render(i).to_rgb8());
    }
    assert_eq!(a.annotations(), b.annotations());
    let other = generate(&SceneConfig { seed: 12, ..cfg }).unwrap();
    assert_ne!(a.render(2).to_rgb8(), other.render(2).to_rgb8());
}

#[test]
fn zero_players_is_pure_background() {
    let cfg = SceneConfig {
        players_per_team: 0,
        noise_sigma: 0.0,
        ..small(5, vec![])
    };
    let s = generate(&cfg).unwrap();
    let frames: Vec<Frame> = (0..5).map(|i| s.render(i)).collect();
    for f in &frames {
        assert_eq!(f, s.background());
    }
    let bg = build_background(&frames).unwrap();
    assert_eq!(bg.image.to_rgb8(), s.background().to_rgb8());
}

#[test]
fn static_player_has_constant_box() {
    let law = PositionLaw::new(4.0, 4.0, 3.0, 3.0);
    let cfg = SceneConfig {
        keyframe_spacing: 1,
        ..small(8, vec![step(0, Activity::Stand, 0, 8, law, Motion::Still)])
    };
    let s = generate(&cfg).unwrap();
    let ann = s.annotations();
    assert_eq!(ann.len(), 8);
    assert!(ann.iter().all(|a| a.bbox == ann[0].bbox && a.tracklet_id == 0));
}

#[test]
fn keyframes_every_spacing_plus_last() {
    let cfg = small(
        30,
        vec![step(2, Activity::Setting, 3, 23, laws::SETTING, Motion::Still)],
    );
    let frames: Vec<usize> = generate(&cfg)
        .unwrap()
        .annotations()
        .iter()
        .map(|a| a.frame_id)
        .collect();
    assert_eq!(frames, vec![3, 8, 13, 18, 23, 25]);
}

#[test]
fn invalid_scripts_are_rejected() {
    let bad = [
        small(10, vec![step(0, Activity::Stand, 0, 0, laws::STAND, Motion::Still)]),
        small(10, vec![step(0, Activity::Stand, 5, 6, laws::STAND, Motion::Still)]),
        small(10, vec![step(99, Activity::Stand, 0, 2, laws::STAND, Motion::Still)]),
        small(
            10,
            vec![
                step(0, Activity::Stand, 0, 5, laws::STAND, Motion::Still),
                step(0, Activity::Block, 4, 2, laws::BLOCK, Motion::Jump),
            ],
        ),
        SceneConfig {
            noise_sigma: -1.0,
            ..small(1, vec![])
        },
    ];
    for cfg in bad {
        assert!(matches!(generate(&cfg), Err(Error::ConfigInvalid(_))), "{cfg:?}");
    }
}

#[test]
fn ground_truth_feet_satisfy_homography() {
    let cfg = SceneConfig::benchmark(3, 1);
    let s = generate(&cfg).unwrap();
    let mut n = 0;
    for f in (0..cfg.frames).step_by(25) {
        for g in s.ground_truth(f) {
            let p = s
                .homography
                .unproject(crate::geometry::CourtPoint::new(g.x, g.y))
                .unwrap();
            assert!(p.distance(&g.feet) < 0.5);
            let b = g.bbox;
            assert!(b.x >= 0.0 && b.y >= 0.0 && b.x + b.w <= cfg.width as f64 && b.y + b.h <= cfg.height as f64);
            n += 1;
        }
    }
    assert!(n > 100);
}

#[test]
fn benchmark_rally_has_every_class() {
    let cfg = SceneConfig::benchmark(5, 2);
    cfg.validate().unwrap();
    let s = generate(&cfg).unwrap();
    for a in Activity::ALL {
        assert!(s.tracklets.iter().filter(|t| t.activity == a).count() >= 2, "{a}");
    }
}

fn chi2_uniform(xs: &[f64], range: [f64; 2], bins: usize) -> f64 {
    let mut counts = vec![0.0; bins];
    for &x in xs {
        let t = ((x - range[0]) / (range[1] - range[0]) * bins as f64).floor() as usize;
        counts[t.min(bins - 1)] += 1.0;
    }
    let e = xs.len() as f64 / bins as f64;
    counts.iter().map(|c| (c - e).powi(2) / e).sum()
}

#[test]
fn positions_follow_their_laws() {
    // 40 rallies of script only; the chi-square bound is the 0.01 quantile at 3 dof
    let cfg = SceneConfig::benchmark(17, 40);
    let s = generate(&cfg).unwrap();
    for a in [
        Activity::Service,
        Activity::Reception,
        Activity::Setting,
        Activity::Attack,
        Activity::Block,
    ] {
        let step = cfg.script.iter().find(|st| st.activity == a).unwrap();
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for t in s.tracklets.iter().filter(|t| t.activity == a) {
            let st = s.states[t.player][t.start];
            let team = cfg.team_of(t.player);
            let (x, y) = cfg.to_court(team, st.x, st.y);
            assert!(step.law.contains(x, y), "{a} at {x},{y}");
            xs.push(x);
            ys.push(y);
        }
        assert!(xs.len() >= 40);
        let (cx, cy) = (chi2_uniform(&xs, step.law.x, 4), chi2_uniform(&ys, step.law.y, 4));
        assert!(cx < 11.345 && cy < 11.345, "{a}: chi2 {cx:.2} {cy:.2}");
    }
}

#[test]
fn emitted_dataset_round_trips() {
    let cfg = small(
        12,
        vec![
            step(1, Activity::Service, 0, 12, laws::SERVICE, Motion::Still),
            step(8, Activity::Block, 2, 7, laws::BLOCK, Motion::Jump),
        ],
    );
    let s = generate(&cfg).unwrap();
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let m1 = emit_dataset(&s, d1.path()).unwrap();
    let m2 = emit_dataset(&generate(&cfg).unwrap(), d2.path()).unwrap();
    assert_eq!(m1, m2);
    assert_eq!(m1.digest(), m2.digest());
    assert_eq!(
        load_annotations(&d1.path().join(ANNOTATIONS_FILE)).unwrap(),
        s.annotations()
    );
    let f = crate::raster::read_ppm(&d1.path().join(FRAMES_DIR).join(crate::raster::frame_file_name(4))).unwrap();
    assert_eq!(f, s.render(4));
    let cal = crate::geometry::read_calibration(&d1.path().join(CALIBRATION_FILE)).unwrap();
    let fit = crate::geometry::fit_homography(&cal).unwrap();
    assert!(fit.rms_residual < 1e-6);
    assert_eq!(load_scene_config(&d1.path().join(SCENE_FILE)).unwrap(), cfg);
}

#[test]
fn empty_scene_manifest() {
    let s = generate(&small(0, vec![])).unwrap();
    let d = tempfile::tempdir().unwrap();
    let m = emit_dataset(&s, d.path()).unwrap();
    assert_eq!((m.annotations, m.frames), (0, 0));
}
