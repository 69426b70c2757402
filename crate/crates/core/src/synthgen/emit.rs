//! Dataset emission: frames, annotations, calibration, ground truth and a
//! manifest of content hashes.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GroundTruthRecord, Scene, SceneConfig, TrackletInfo};
use crate::error::{Error, Result};
use crate::geometry::format_calibration;
use crate::pipeline::format_annotations;
use crate::provenance::sha256_hex;
use crate::raster::{encode_ppm, frame_file_name, write_bytes};

pub const FRAMES_DIR: &str = "frames";
pub const ANNOTATIONS_FILE: &str = "annotations.csv";
pub const CALIBRATION_FILE: &str = "calibration.txt";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const SCENE_FILE: &str = "scene.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub annotations: usize,
    pub tracklets: usize,
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    /// Hash over the sorted file hashes.
    pub fn digest(&self) -> String {
        let mut s = String::new();
        for f in &self.files {
            s.push_str(&f.path);
            s.push(' ');
            s.push_str(&f.sha256);
            s.push('\n');
        }
        sha256_hex(s.as_bytes())
    }
}

#[derive(Serialize)]
struct GroundTruth<'a> {
    homography: [[f64; 3]; 3],
    tracklets: &'a [TrackletInfo],
    records: Vec<GroundTruthRecord>,
}

fn put(dir: &Path, rel: &str, bytes: &[u8], files: &mut Vec<ManifestEntry>) -> Result<()> {
    write_bytes(&dir.join(rel), bytes)?;
    files.push(ManifestEntry {
        path: rel.to_string(),
        sha256: sha256_hex(bytes),
        bytes: bytes.len() as u64,
    });
    Ok(())
}

pub fn load_scene_config(path: &Path) -> Result<SceneConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes the dataset under `dir`. Frames are rendered in parallel batches
/// and written in order by this thread.
pub fn emit_dataset(scene: &Scene, dir: &Path) -> Result<Manifest> {
    let frames_dir: PathBuf = dir.join(FRAMES_DIR);
    fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    let mut files = Vec::new();

    put(
        dir,
        SCENE_FILE,
        serde_json::to_string_pretty(&scene.config)?.as_bytes(),
        &mut files,
    )?;
    let landmarks = scene.camera.landmarks(&scene.config.court);
    put(
        dir,
        CALIBRATION_FILE,
        format_calibration(&landmarks).as_bytes(),
        &mut files,
    )?;
    let annotations = scene.annotations();
    put(
        dir,
        ANNOTATIONS_FILE,
        format_annotations(&annotations).as_bytes(),
        &mut files,
    )?;
    let gt = GroundTruth {
        homography: scene.homography.rows(),
        tracklets: &scene.tracklets,
        records: (0..scene.frame_count()).flat_map(|f| scene.ground_truth(f)).collect(),
    };
    put(
        dir,
        GROUND_TRUTH_FILE,
        serde_json::to_string(&gt)?.as_bytes(),
        &mut files,
    )?;

    const BATCH: usize = 64;
    for start in (0..scene.frame_count()).step_by(BATCH) {
        let end = (start + BATCH).min(scene.frame_count());
        let encoded: Vec<Vec<u8>> = (start..end)
            .into_par_iter()
            .map(|i| encode_ppm(&scene.render(i)))
            .collect();
        for (i, bytes) in (start..end).zip(encoded) {
            put(dir, &format!("{FRAMES_DIR}/{}", frame_file_name(i)), &bytes, &mut files)?;
        }
    }

    let manifest = Manifest {
        seed: scene.config.seed,
        frames: scene.frame_count(),
        width: scene.config.width,
        height: scene.config.height,
        annotations: annotations.len(),
        tracklets: scene.tracklets.len(),
        files,
    };
    let path = dir.join(MANIFEST_FILE);
    write_bytes(&path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(manifest)
}
