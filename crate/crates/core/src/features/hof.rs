//! Histograms of oriented optical flow.

use crate::error::{Error, Result};

use super::flow::FlowField;
use super::hog::{blocks_from_cells, vote, HogParams};

/// Flow magnitudes below this count as "no motion".
pub const STILL_THRESHOLD: f64 = 0.5;

/// Unnormalized per-cell histograms: `bins` signed orientation bins weighted by
/// magnitude, then one still-pixel count bin.
pub fn hof_cells(flow: &FlowField, p: &HogParams) -> Result<Vec<f64>> {
    if flow.width == 0 || flow.height == 0 {
        return Err(Error::EmptyPatch);
    }
    p.validate()?;
    if (flow.width, flow.height) != (p.patch_w, p.patch_h) {
        return Err(Error::dims((p.patch_w, p.patch_h), (flow.width, flow.height)));
    }
    let len = p.bins + 1;
    let cx = p.cells_x();
    let bin_width = 360.0 / p.bins as f64;
    let mut cells = vec![0.0; cx * p.cells_y() * len];
    for y in 0..flow.height {
        for x in 0..flow.width {
            let [dx, dy] = flow.get(x, y);
            let c = (y / p.cell) * cx + x / p.cell;
            let hist = &mut cells[c * len..(c + 1) * len];
            let mag = dx.hypot(dy);
            if mag < STILL_THRESHOLD {
                hist[p.bins] += 1.0;
            } else {
                let theta = dy.atan2(dx).to_degrees().rem_euclid(360.0);
                vote(&mut hist[..p.bins], theta / bin_width, mag);
            }
        }
    }
    Ok(cells)
}

pub fn hof(flow: &FlowField, p: &HogParams) -> Result<Vec<f64>> {
    let cells = hof_cells(flow, p)?;
    Ok(blocks_from_cells(&cells, p.bins + 1, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> HogParams {
        HogParams {
            patch_w: 16,
            patch_h: 16,
            cell: 8,
            cells_per_block: 2,
            bins: 8,
        }
    }

    #[test]
    fn zero_flow_fills_still_bins() {
        let p = params();
        let cells = hof_cells(&FlowField::zeros(16, 16), &p).unwrap();
        for c in cells.chunks(9) {
            assert_eq!(c[8], 64.0);
            assert!(c[..8].iter().all(|&v| v == 0.0));
        }
        let d = hof(&FlowField::zeros(16, 16), &p).unwrap();
        for (i, v) in d.iter().enumerate() {
            assert_eq!(*v == 0.0, i % 9 != 8);
        }
    }

    #[test]
    fn rightward_flow_fills_zero_degree_bin() {
        let p = params();
        let cells = hof_cells(&FlowField::uniform(16, 16, [2.0, 0.0]), &p).unwrap();
        for c in cells.chunks(9) {
            assert_eq!(c[0], 128.0);
            assert!(c[1..].iter().all(|&v| v == 0.0));
        }
    }

    fn random_flow(rng: &mut ChaCha8Rng, w: usize, h: usize) -> FlowField {
        FlowField {
            width: w,
            height: h,
            data: (0..w * h)
                .map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)])
                .collect(),
        }
    }

    #[test]
    fn unnormalized_mass_is_magnitude_plus_still_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = params();
        let f = random_flow(&mut rng, 16, 16);
        let total: f64 = hof_cells(&f, &p).unwrap().iter().sum();
        let expect: f64 = f
            .data
            .iter()
            .map(|d| {
                let m = d[0].hypot(d[1]);
                if m < STILL_THRESHOLD {
                    1.0
                } else {
                    m
                }
            })
            .sum();
        assert!((total - expect).abs() < 1e-9);
    }

    /// Block-by-block recomputation straight from the flow vectors.
    fn naive_hof(f: &FlowField, p: &HogParams) -> Vec<f64> {
        let nb = p.bins;
        let mut out = Vec::new();
        let ncx = f.width / p.cell;
        let ncy = f.height / p.cell;
        for by in 0..=(ncy - p.cells_per_block) {
            for bx in 0..=(ncx - p.cells_per_block) {
                let mut block = Vec::new();
                for cy in by..by + p.cells_per_block {
                    for cx in bx..bx + p.cells_per_block {
                        let mut h = vec![0.0; nb + 1];
                        for y in cy * p.cell..(cy + 1) * p.cell {
                            for x in cx * p.cell..(cx + 1) * p.cell {
                                let d = f.data[y * f.width + x];
                                let m = (d[0] * d[0] + d[1] * d[1]).sqrt();
                                if m < 0.5 {
                                    h[nb] += 1.0;
                                    continue;
                                }
                                let mut a = d[1].atan2(d[0]).to_degrees();
                                if a < 0.0 {
                                    a += 360.0;
                                }
                                let pos = a / (360.0 / nb as f64);
                                let i0 = pos.floor() as usize % nb;
                                let t = pos - pos.floor();
                                h[i0] += m * (1.0 - t);
                                h[(i0 + 1) % nb] += m * t;
                            }
                        }
                        block.extend(h);
                    }
                }
                let n = block.iter().map(|v| v * v).sum::<f64>().sqrt();
                if n > 0.0 {
                    block.iter_mut().for_each(|v| *v = (*v / n).min(0.2));
                    let n2 = block.iter().map(|v| v * v).sum::<f64>().sqrt();
                    block.iter_mut().for_each(|v| *v /= n2);
                }
                out.extend(block);
            }
        }
        out
    }

    #[test]
    fn random_flow_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = HogParams {
            patch_w: 24,
            patch_h: 32,
            cell: 8,
            cells_per_block: 2,
            bins: 8,
        };
        let f = random_flow(&mut rng, 24, 32);
        let a = hof(&f, &p).unwrap();
        let b = naive_hof(&f, &p);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
        assert!(a.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn empty_patch() {
        assert!(matches!(
            hof(&FlowField::zeros(0, 0), &params()),
            Err(Error::EmptyPatch)
        ));
    }
}
