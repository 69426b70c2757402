use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn courtside(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_courtside"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn train_help_lists_every_sweepable_parameter() {
    let tmp = tempfile::tempdir().unwrap();
    let o = courtside(&["train", "--help"], tmp.path());
    assert!(o.status.success());
    let text = stdout(&o);
    for flag in [
        "--dataset",
        "--seed",
        "--mask",
        "--kernel",
        "--c",
        "--gamma",
        "--k",
        "--grid-bx",
        "--grid-by",
        "--grid-spacing-x",
        "--grid-spacing-y",
        "--cell-size",
        "--patch-w",
        "--patch-h",
        "--cells-per-block",
        "--bins",
        "--workers",
        "--out",
    ] {
        assert!(text.contains(flag), "train --help lacks {flag}:\n{text}");
    }
}

#[test]
fn every_subcommand_has_help() {
    let tmp = tempfile::tempdir().unwrap();
    for sub in ["synth", "calibrate", "train", "eval", "sweep-k", "run", "replay"] {
        let o = courtside(&[sub, "--help"], tmp.path());
        assert!(o.status.success(), "{sub} --help failed");
        assert!(stdout(&o).contains("--"), "{sub} --help lists no options");
    }
    let run = stdout(&courtside(&["run", "--help"], tmp.path()));
    assert!(run.contains("--ks"));
}

#[test]
fn missing_inputs_fail_without_partial_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 5] = [
        &["train", "--dataset", "absent", "--seed", "1", "--out", "o1"],
        &["eval", "--model", "absent", "--dataset", "absent", "--out", "o2"],
        &["sweep-k", "--model", "absent", "--dataset", "absent", "--out", "o3"],
        &["calibrate", "--pairs", "absent.txt", "--out", "o4"],
        &["replay", "--run", "absent.json", "--out", "o5"],
    ];
    for args in cases {
        let o = courtside(args, tmp.path());
        assert!(!o.status.success(), "{args:?} succeeded");
        assert!(!o.stderr.is_empty());
    }
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);
}

#[test]
fn synth_requires_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let o = courtside(&["synth", "--out", "ds"], tmp.path());
    assert!(!o.status.success());
    assert!(!tmp.path().join("ds").exists());
}

#[test]
fn malformed_pairs_fail_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("pairs.txt"), "1 2 3\n").unwrap();
    let o = courtside(&["calibrate", "--pairs", "pairs.txt", "--out", "cal"], tmp.path());
    assert!(!o.status.success());
    assert!(!tmp.path().join("cal").exists());
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "run.json")
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

#[test]
fn synth_train_eval_sweep_and_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let ok = |args: &[&str]| {
        let o = courtside(args, d);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    };
    ok(&["synth", "--seed", "5", "--rallies", "1", "--out", "ds"]);
    assert!(d.join("ds/frames/frame_000499.ppm").is_file());
    assert!(d.join("ds/run.json").is_file());

    ok(&["calibrate", "--pairs", "ds/calibration.txt", "--out", "cal"]);
    let h = fs::read_to_string(d.join("cal/homography.txt")).unwrap();
    assert_eq!(h.lines().filter(|l| !l.starts_with('#')).count(), 3);

    let train = [
        "--workers",
        "2",
        "train",
        "--dataset",
        "ds",
        "--seed",
        "5",
        "--mask",
        "hog,rwpc",
        "--kernel",
        "rbf",
        "--c",
        "1",
        "--gamma",
        "0.5",
        "--out",
        "model",
    ];
    ok(&train);
    for f in [
        "stage1_model.json",
        "stage2_model.json",
        "stage1_grid.csv",
        "pipeline.json",
        "run.json",
    ] {
        assert!(d.join("model").join(f).is_file(), "missing {f}");
    }
    let grid = fs::read_to_string(d.join("model/stage1_grid.csv")).unwrap();
    assert!(grid.starts_with("kernel,C,gamma,mask,fold,macro_acc"));
    let run: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("model/run.json")).unwrap()).unwrap();
    assert_eq!(run["invocation"]["config"]["seed"], 5);
    assert_eq!(run["invocation"]["config"]["stage1"]["gammas"]["absolute"][0], 0.5);

    ok(&["eval", "--model", "model", "--dataset", "ds", "--out", "ev"]);
    let csv = fs::read_to_string(d.join("ev/stage2_confusion.csv")).unwrap();
    assert!(csv.starts_with("truth,stand,service,reception,setting,attack,block,defense_move"));

    ok(&[
        "sweep-k",
        "--model",
        "model",
        "--dataset",
        "ds",
        "--ks",
        "10,20",
        "--out",
        "sweep",
    ]);
    let sweep = fs::read_to_string(d.join("sweep/k_sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 3);

    // a different worker count must not change anything
    ok(&[
        "--workers",
        "1",
        "replay",
        "--run",
        "model/run.json",
        "--out",
        "model_again",
    ]);
    assert_eq!(read_tree(&d.join("model")), read_tree(&d.join("model_again")));

    // refuses to overwrite results
    let o = courtside(&train, d);
    assert!(!o.status.success());
}
