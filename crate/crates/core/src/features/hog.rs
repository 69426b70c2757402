//! Histograms of oriented gradients over a fixed-size grayscale patch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HogParams {
    pub patch_w: usize,
    pub patch_h: usize,
    pub cell: usize,
    pub cells_per_block: usize,
    pub bins: usize,
}

impl Default for HogParams {
    fn default() -> Self {
        HogParams {
            patch_w: 64,
            patch_h: 128,
            cell: 8,
            cells_per_block: 2,
            bins: 9,
        }
    }
}

impl HogParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.cell > 0
            && self.bins > 0
            && self.cells_per_block > 0
            && self.patch_w > 0
            && self.patch_h > 0
            && self.patch_w % self.cell == 0
            && self.patch_h % self.cell == 0
            && self.cells_per_block <= self.cells_x()
            && self.cells_per_block <= self.cells_y();
        if ok {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(format!("invalid histogram params {self:?}")))
        }
    }

    pub fn cells_x(&self) -> usize {
        self.patch_w / self.cell
    }

    pub fn cells_y(&self) -> usize {
        self.patch_h / self.cell
    }

    pub fn blocks(&self) -> (usize, usize) {
        (
            self.cells_x() + 1 - self.cells_per_block,
            self.cells_y() + 1 - self.cells_per_block,
        )
    }

    /// Descriptor length for `cell_len` values per cell.
    pub fn descriptor_len(&self, cell_len: usize) -> usize {
        let (bx, by) = self.blocks();
        bx * by * self.cells_per_block * self.cells_per_block * cell_len
    }
}

/// Splits `value` between the two bins nearest to `pos` (in bin units, bin
/// centers at integers), wrapping around.
#[inline]
pub(crate) fn vote(hist: &mut [f64], pos: f64, value: f64) {
    let n = hist.len();
    let lo = pos.floor();
    let frac = pos - lo;
    let i = (lo as isize).rem_euclid(n as isize) as usize;
    hist[i] += value * (1.0 - frac);
    hist[(i + 1) % n] += value * frac;
}

/// L2 normalize, clip at 0.2, renormalize. Zero vectors stay zero.
pub(crate) fn l2_hys(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        return;
    }
    for x in v.iter_mut() {
        *x = (*x / n).min(0.2);
    }
    let n2 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n2 > 0.0 {
        for x in v.iter_mut() {
            *x /= n2;
        }
    }
}

/// Groups cell histograms (row-major, `cell_len` each) into overlapping
/// blocks with unit cell stride and L2-hys normalizes each block.
pub(crate) fn blocks_from_cells(cells: &[f64], cell_len: usize, p: &HogParams) -> Vec<f64> {
    let (bx, by) = p.blocks();
    let cx = p.cells_x();
    let k = p.cells_per_block;
    let mut out = Vec::with_capacity(p.descriptor_len(cell_len));
    let mut block = Vec::with_capacity(k * k * cell_len);
    for byi in 0..by {
        for bxi in 0..bx {
            block.clear();
            for cy in byi..byi + k {
                for cxi in bxi..bxi + k {
                    let off = (cy * cx + cxi) * cell_len;
                    block.extend_from_slice(&cells[off..off + cell_len]);
                }
            }
            l2_hys(&mut block);
            out.extend_from_slice(&block);
        }
    }
    out
}

/// Unnormalized per-cell orientation histograms (row-major cells).
pub fn hog_cells(patch: &GrayImage, p: &HogParams) -> Result<Vec<f64>> {
    if patch.width == 0 || patch.height == 0 {
        return Err(Error::EmptyPatch);
    }
    p.validate()?;
    if (patch.width, patch.height) != (p.patch_w, p.patch_h) {
        return Err(Error::dims((p.patch_w, p.patch_h), (patch.width, patch.height)));
    }
    let cx = p.cells_x();
    let bin_width = 180.0 / p.bins as f64;
    let mut cells = vec![0.0; cx * p.cells_y() * p.bins];
    for y in 0..patch.height {
        for x in 0..patch.width {
            let (xi, yi) = (x as isize, y as isize);
            let gx = patch.get_clamped(xi + 1, yi) - patch.get_clamped(xi - 1, yi);
            let gy = patch.get_clamped(xi, yi + 1) - patch.get_clamped(xi, yi - 1);
            let mag = gx.hypot(gy);
            if mag == 0.0 {
                continue;
            }
            let theta = gy.atan2(gx).to_degrees().rem_euclid(180.0);
            let c = (y / p.cell) * cx + x / p.cell;
            vote(&mut cells[c * p.bins..(c + 1) * p.bins], theta / bin_width, mag);
        }
    }
    Ok(cells)
}

/// Unsigned-orientation HOG with bilinear orientation voting and L2-hys blocks.
pub fn hog(patch: &GrayImage, p: &HogParams) -> Result<Vec<f64>> {
    let cells = hog_cells(patch, p)?;
    Ok(blocks_from_cells(&cells, p.bins, p))
}
