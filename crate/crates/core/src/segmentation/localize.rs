use serde::{Deserialize, Serialize};

use crate::geometry::{CourtModel, CourtPoint, Homography, ImagePoint, ImageRect};

use super::ProbabilityMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerDetection {
    pub court_position: CourtPoint,
    /// Bounding box of the thresholded blob.
    pub image_blob: ImageRect,
    pub feet: ImagePoint,
    /// Sum of P_player over the blob.
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct LocalizeConfig {
    pub threshold: f64,
    pub min_mass: f64,
    /// Rows at the bottom of a blob averaged for the feet column.
    pub feet_rows: usize,
}

impl Default for LocalizeConfig {
    fn default() -> Self {
        LocalizeConfig {
            threshold: 0.12,
            min_mass: 12.0,
            feet_rows: 3,
        }
    }
}

struct Blob {
    pixels: Vec<(usize, usize)>,
    mass: f64,
}

fn components(p: &ProbabilityMap, threshold: f64) -> Vec<Blob> {
    let (w, h) = p.dims();
    let mut label = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if label[start] || p.data[start] <= threshold {
            continue;
        }
        label[start] = true;
        stack.push(start);
        let mut blob = Blob {
            pixels: Vec::new(),
            mass: 0.0,
        };
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            blob.pixels.push((x, y));
            blob.mass += p.data[i];
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if !label[j] && p.data[j] > threshold {
                        label[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        out.push(blob);
    }
    out
}

/// Thresholds the player map, labels 8-connected blobs and places each blob
/// on the court through its bottom-center (feet) pixel.
pub fn localize_players(
    p: &ProbabilityMap,
    h: &Homography,
    court: &CourtModel,
    cfg: &LocalizeConfig,
) -> Vec<PlayerDetection> {
    let mut dets: Vec<PlayerDetection> = components(p, cfg.threshold)
        .into_iter()
        .filter(|b| b.mass >= cfg.min_mass)
        .filter_map(|b| {
            let x0 = b.pixels.iter().map(|q| q.0).min()?;
            let x1 = b.pixels.iter().map(|q| q.0).max()?;
            let y0 = b.pixels.iter().map(|q| q.1).min()?;
            let y1 = b.pixels.iter().map(|q| q.1).max()?;
            let low = y1.saturating_sub(cfg.feet_rows.max(1) - 1);
            let bottom: Vec<usize> = b.pixels.iter().filter(|q| q.1 >= low).map(|q| q.0).collect();
            let fx = bottom.iter().map(|&x| x as f64 + 0.5).sum::<f64>() / bottom.len() as f64;
            let feet = ImagePoint::new(fx, (y1 + 1) as f64);
            let court_position = h.project(feet).ok()?;
            if !court.contains(court_position) {
                return None;
            }
            Some(PlayerDetection {
                court_position,
                image_blob: ImageRect::new(x0 as f64, y0 as f64, (x1 - x0 + 1) as f64, (y1 - y0 + 1) as f64),
                feet,
                mass: b.mass,
            })
        })
        .collect();
    dets.sort_by(|a, b| {
        b.mass
            .total_cmp(&a.mass)
            .then(a.feet.y.total_cmp(&b.feet.y))
            .then(a.feet.x.total_cmp(&b.feet.x))
    });
    dets
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::MapKind;

    fn blank(w: usize, h: usize) -> ProbabilityMap {
        ProbabilityMap::filled(w, h, MapKind::Player, 0.0)
    }

    fn paint(p: &mut ProbabilityMap, x0: usize, y0: usize, w: usize, h: usize, v: f64) {
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                p.data[y * p.width + x] = v;
            }
        }
    }

    fn court() -> CourtModel {
        CourtModel::new(100.0, 100.0, 0.0, 50.0).unwrap()
    }

    #[test]
    fn empty_map() {
        let p = blank(20, 20);
        assert!(localize_players(&p, &Homography::identity(), &court(), &LocalizeConfig::default()).is_empty());
    }

    #[test]
    fn single_blob_feet_point() {
        let mut p = blank(40, 40);
        paint(&mut p, 10, 5, 5, 20, 0.5);
        let cfg = LocalizeConfig {
            threshold: 0.1,
            min_mass: 1.0,
            feet_rows: 3,
        };
        let d = localize_players(&p, &Homography::identity(), &court(), &cfg);
        assert_eq!(d.len(), 1);
        assert!((d[0].court_position.x - 12.5).abs() < 1e-12);
        assert!((d[0].court_position.y - 25.0).abs() < 1e-12);
        assert!((d[0].mass - 50.0).abs() < 1e-9);
        assert_eq!(d[0].image_blob, ImageRect::new(10.0, 5.0, 5.0, 20.0));
    }

    #[test]
    fn diagonal_pixels_join_and_small_blobs_drop() {
        let mut p = blank(30, 30);
        paint(&mut p, 2, 2, 3, 3, 0.9);
        paint(&mut p, 5, 5, 3, 3, 0.9);
        paint(&mut p, 20, 20, 1, 1, 0.9);
        let cfg = LocalizeConfig {
            threshold: 0.5,
            min_mass: 2.0,
            feet_rows: 1,
        };
        let d = localize_players(&p, &Homography::identity(), &court(), &cfg);
        assert_eq!(d.len(), 1);
        assert!((d[0].mass - 18.0 * 0.9).abs() < 1e-9);
    }

    #[test]
    fn sorted_by_mass() {
        let mut p = blank(50, 50);
        paint(&mut p, 2, 2, 3, 3, 0.9);
        paint(&mut p, 20, 20, 6, 6, 0.9);
        let cfg = LocalizeConfig {
            threshold: 0.5,
            min_mass: 1.0,
            feet_rows: 1,
        };
        let d = localize_players(&p, &Homography::identity(), &court(), &cfg);
        assert_eq!(d.len(), 2);
        assert!(d[0].mass > d[1].mass);
    }

    #[test]
    fn scaling_above_threshold_keeps_blob_count() {
        let mut p = blank(50, 50);
        paint(&mut p, 2, 2, 4, 4, 0.3);
        paint(&mut p, 20, 20, 6, 6, 0.4);
        paint(&mut p, 40, 5, 3, 8, 0.2);
        let cfg = LocalizeConfig {
            threshold: 0.15,
            min_mass: 0.5,
            feet_rows: 1,
        };
        let base = localize_players(&p, &Homography::identity(), &court(), &cfg).len();
        for s in [1.0, 1.5, 2.5] {
            let mut q = p.clone();
            for v in q.data.iter_mut() {
                if *v > cfg.threshold {
                    *v = (*v * s).min(1.0);
                }
            }
            assert_eq!(
                localize_players(&q, &Homography::identity(), &court(), &cfg).len(),
                base
            );
        }
    }

    #[test]
    fn outside_court_is_dropped() {
        let mut p = blank(20, 20);
        paint(&mut p, 2, 2, 3, 3, 0.9);
        let small = CourtModel::new(2.0, 2.0, 0.0, 1.0).unwrap();
        let cfg = LocalizeConfig {
            threshold: 0.5,
            min_mass: 1.0,
            feet_rows: 1,
        };
        assert!(localize_players(&p, &Homography::identity(), &small, &cfg).is_empty());
    }
}
