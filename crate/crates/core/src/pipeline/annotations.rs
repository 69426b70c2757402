//! Annotation records, keyframe interpolation and the tracklet split.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activity::Activity;
use crate::error::{Error, Result};
use crate::geometry::ImageRect;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub frame_id: usize,
    pub tracklet_id: u32,
    pub class: Activity,
    pub bbox: ImageRect,
}

pub const ANNOTATION_HEADER: &str = "frame_id,tracklet_id,class,x,y,w,h";

/// Parses `frame_id,tracklet_id,class,x,y,w,h` lines. Blank lines, `#`
/// comments and a header line are skipped.
pub fn parse_annotations(text: &str, source: &str) -> Result<Vec<AnnotationRecord>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line == ANNOTATION_HEADER {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: source.to_string(),
            line: i + 1,
            message,
        };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 7 {
            return Err(err(format!("expected 7 fields, found {}", f.len())));
        }
        let frame_id = f[0].parse().map_err(|e| err(format!("frame_id: {e}")))?;
        let tracklet_id = f[1].parse().map_err(|e| err(format!("tracklet_id: {e}")))?;
        let class: Activity = f[2].parse()?;
        let mut v = [0.0; 4];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = f[3 + k]
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| err(format!("bad coordinate `{}`", f[3 + k])))?;
        }
        if v[2] < 0.0 || v[3] < 0.0 {
            return Err(err("negative box size".into()));
        }
        out.push(AnnotationRecord {
            frame_id,
            tracklet_id,
            class,
            bbox: ImageRect::new(v[0], v[1], v[2], v[3]),
        });
    }
    Ok(out)
}

pub fn load_annotations(path: &Path) -> Result<Vec<AnnotationRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(&text, &path.display().to_string())
}

/// Shortest round-tripping float formatting, so reading back is lossless.
pub fn format_annotations(records: &[AnnotationRecord]) -> String {
    let mut s = format!("{ANNOTATION_HEADER}\n");
    for r in records {
        let b = &r.bbox;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.frame_id, r.tracklet_id, r.class, b.x, b.y, b.w, b.h
        );
    }
    s
}

pub fn write_annotations(path: &Path, records: &[AnnotationRecord]) -> Result<()> {
    std::fs::write(path, format_annotations(records)).map_err(|e| Error::io(path, e))
}

/// Class of every tracklet; fails if a tracklet changes class.
pub fn tracklet_classes(records: &[AnnotationRecord]) -> Result<BTreeMap<u32, Activity>> {
    let mut classes = BTreeMap::new();
    for r in records {
        let c = *classes.entry(r.tracklet_id).or_insert(r.class);
        if c != r.class {
            return Err(Error::ClassChangeWithinTracklet {
                tracklet: r.tracklet_id,
                from: c.to_string(),
                to: r.class.to_string(),
            });
        }
    }
    Ok(classes)
}

/// Per-frame records between consecutive keyframes of each tracklet, with
/// box corners interpolated linearly. Output is sorted by (frame, tracklet).
pub fn interpolate(records: &[AnnotationRecord]) -> Result<Vec<AnnotationRecord>> {
    tracklet_classes(records)?;
    let mut by_tracklet: BTreeMap<u32, BTreeMap<usize, AnnotationRecord>> = BTreeMap::new();
    for r in records {
        // a repeated keyframe keeps its last occurrence
        by_tracklet.entry(r.tracklet_id).or_default().insert(r.frame_id, *r);
    }
    let mut out = Vec::new();
    for keys in by_tracklet.values() {
        let keys: Vec<&AnnotationRecord> = keys.values().collect();
        out.push(*keys[0]);
        for pair in keys.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let span = (b.frame_id - a.frame_id) as f64;
            let (a0, a1) = corners(&a.bbox);
            let (b0, b1) = corners(&b.bbox);
            for f in a.frame_id + 1..=b.frame_id {
                if f == b.frame_id {
                    out.push(*b);
                    continue;
                }
                let t = (f - a.frame_id) as f64 / span;
                let lerp = |p: f64, q: f64| p + (q - p) * t;
                let (x0, y0) = (lerp(a0.0, b0.0), lerp(a0.1, b0.1));
                let (x1, y1) = (lerp(a1.0, b1.0), lerp(a1.1, b1.1));
                out.push(AnnotationRecord {
                    frame_id: f,
                    tracklet_id: a.tracklet_id,
                    class: a.class,
                    bbox: ImageRect::new(x0, y0, x1 - x0, y1 - y0),
                });
            }
        }
    }
    out.sort_by_key(|r| (r.frame_id, r.tracklet_id));
    Ok(out)
}

fn corners(b: &ImageRect) -> ((f64, f64), (f64, f64)) {
    ((b.x, b.y), (b.x + b.w, b.y + b.h))
}

/// Train/test partition of tracklets. Every annotation of a tracklet lands on
/// the same side; frames may hold annotations from both sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: BTreeSet<u32>,
    pub test: BTreeSet<u32>,
    pub ratio: f64,
    pub seed: u64,
    pub warnings: Vec<String>,
}

impl Split {
    pub fn is_train(&self, tracklet: u32) -> bool {
        self.train.contains(&tracklet)
    }

    pub fn train_frames(&self, records: &[AnnotationRecord]) -> BTreeSet<usize> {
        records
            .iter()
            .filter(|r| self.train.contains(&r.tracklet_id))
            .map(|r| r.frame_id)
            .collect()
    }

    pub fn test_frames(&self, records: &[AnnotationRecord]) -> BTreeSet<usize> {
        records
            .iter()
            .filter(|r| self.test.contains(&r.tracklet_id))
            .map(|r| r.frame_id)
            .collect()
    }
}

/// Stratified per class on tracklet counts. A class with one tracklet goes to
/// training and is reported in `warnings`.
pub fn split_by_tracklet(records: &[AnnotationRecord], ratio: f64, seed: u64) -> Result<Split> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::ConfigInvalid(format!("split ratio {ratio} outside (0, 1)")));
    }
    let classes = tracklet_classes(records)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split {
        train: BTreeSet::new(),
        test: BTreeSet::new(),
        ratio,
        seed,
        warnings: Vec::new(),
    };
    for a in Activity::ALL {
        let mut ids: Vec<u32> = classes.iter().filter(|(_, &c)| c == a).map(|(&t, _)| t).collect();
        if ids.is_empty() {
            continue;
        }
        if ids.len() == 1 {
            let msg = format!("class {a} has a single tracklet; it goes to training");
            log::warn!("{msg}");
            split.warnings.push(msg);
            split.train.insert(ids[0]);
            continue;
        }
        ids.shuffle(&mut rng);
        let n_train = ((ids.len() as f64 * ratio).round() as usize).clamp(1, ids.len() - 1);
        split.train.extend(&ids[..n_train]);
        split.test.extend(&ids[n_train..]);
    }
    Ok(split)
}
