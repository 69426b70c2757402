//! Dense pyramidal gradient-based (Lucas-Kanade style) optical flow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ImageRect;
use crate::raster::{Frame, GrayImage};

const MIN_EIGEN: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub levels: usize,
    /// Odd side length of the integration window.
    pub window: usize,
    pub iterations: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            levels: 3,
            window: 9,
            iterations: 5,
        }
    }
}

/// Per-pixel displacement `(dx, dy)` in pixels per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f64; 2]>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        FlowField {
            width,
            height,
            data: vec![[0.0; 2]; width * height],
        }
    }

    pub fn uniform(width: usize, height: usize, d: [f64; 2]) -> Self {
        FlowField {
            width,
            height,
            data: vec![d; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 2] {
        self.data[y * self.width + x]
    }

    fn component(&self, c: usize) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|d| d[c]).collect(),
        }
    }

    /// Bilinear resampling of `rect` to `out_w` x `out_h`; vectors keep their pixel units.
    pub fn resample(&self, rect: &ImageRect, out_w: usize, out_h: usize) -> FlowField {
        let (u, v) = (self.component(0), self.component(1));
        let a = u.resample(rect, out_w, out_h);
        let b = v.resample(rect, out_w, out_h);
        FlowField {
            width: out_w,
            height: out_h,
            data: a.data.into_iter().zip(b.data).map(|(x, y)| [x, y]).collect(),
        }
    }
}

fn blur_downsample(img: &GrayImage) -> GrayImage {
    const K: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
    let (w, h) = (img.width, img.height);
    let mut tmp = GrayImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            tmp.data[y * w + x] = (0..5)
                .map(|k| K[k] * img.get_clamped(x as isize + k as isize - 2, y as isize))
                .sum();
        }
    }
    let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
    GrayImage::from_fn(nw, nh, |x, y| {
        (0..5)
            .map(|k| K[k] * tmp.get_clamped(2 * x as isize, 2 * y as isize + k as isize - 2))
            .sum()
    })
}

fn box_sum(img: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    // summed-area table with clamped window
    let mut sat = vec![0.0; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0.0;
        for x in 0..w {
            row += img[y * w + x];
            sat[(y + 1) * (w + 1) + x + 1] = sat[y * (w + 1) + x + 1] + row;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let y0 = y.saturating_sub(r);
        let y1 = (y + r + 1).min(h);
        for x in 0..w {
            let x0 = x.saturating_sub(r);
            let x1 = (x + r + 1).min(w);
            out[y * w + x] =
                sat[y1 * (w + 1) + x1] - sat[y0 * (w + 1) + x1] - sat[y1 * (w + 1) + x0] + sat[y0 * (w + 1) + x0];
        }
    }
    out
}

fn refine_level(prev: &GrayImage, cur: &GrayImage, flow: &mut [[f64; 2]], r: usize, iterations: usize) {
    let (w, h) = (prev.width, prev.height);
    let mut ix = vec![0.0; w * h];
    let mut iy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (xi, yi) = (x as isize, y as isize);
            ix[y * w + x] = 0.5 * (prev.get_clamped(xi + 1, yi) - prev.get_clamped(xi - 1, yi));
            iy[y * w + x] = 0.5 * (prev.get_clamped(xi, yi + 1) - prev.get_clamped(xi, yi - 1));
        }
    }
    let sxx = box_sum(&ix.iter().map(|v| v * v).collect::<Vec<_>>(), w, h, r);
    let sxy = box_sum(&ix.iter().zip(&iy).map(|(a, b)| a * b).collect::<Vec<_>>(), w, h, r);
    let syy = box_sum(&iy.iter().map(|v| v * v).collect::<Vec<_>>(), w, h, r);

    // inverse structure tensors, None where ill-conditioned
    let inv: Vec<Option<[f64; 3]>> = (0..w * h)
        .map(|i| {
            let (a, b, c) = (sxx[i], sxy[i], syy[i]);
            let tr = 0.5 * (a + c);
            let disc = (0.25 * (a - c).powi(2) + b * b).sqrt();
            if tr - disc < MIN_EIGEN {
                return None;
            }
            let det = a * c - b * b;
            Some([c / det, -b / det, a / det])
        })
        .collect();

    let mut ixt = vec![0.0; w * h];
    let mut iyt = vec![0.0; w * h];
    for _ in 0..iterations {
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let d = flow[i];
                let it = cur.sample(x as f64 + d[0], y as f64 + d[1]) - prev.get(x, y);
                ixt[i] = ix[i] * it;
                iyt[i] = iy[i] * it;
            }
        }
        let bx = box_sum(&ixt, w, h, r);
        let by = box_sum(&iyt, w, h, r);
        for i in 0..w * h {
            match inv[i] {
                Some([p, q, s]) => {
                    flow[i][0] -= p * bx[i] + q * by[i];
                    flow[i][1] -= q * bx[i] + s * by[i];
                }
                None => flow[i] = [0.0; 2],
            }
        }
    }
}

/// Coarse-to-fine flow such that `cur(x + d) ≈ prev(x)`.
pub fn dense_flow_gray(prev: &GrayImage, cur: &GrayImage, cfg: &FlowConfig) -> Result<FlowField> {
    if (prev.width, prev.height) != (cur.width, cur.height) {
        return Err(Error::dims((prev.width, prev.height), (cur.width, cur.height)));
    }
    if cfg.levels == 0 || cfg.window == 0 {
        return Err(Error::ConfigInvalid(
            "flow needs at least one level and a window".into(),
        ));
    }
    let (w, h) = (prev.width, prev.height);
    if w == 0 || h == 0 {
        return Ok(FlowField::zeros(w, h));
    }
    let r = cfg.window / 2;
    let mut pyr = vec![(prev.clone(), cur.clone())];
    while pyr.len() < cfg.levels {
        let (p, c) = pyr.last().unwrap();
        if p.width < 2 * cfg.window || p.height < 2 * cfg.window {
            break;
        }
        let next = (blur_downsample(p), blur_downsample(c));
        pyr.push(next);
    }
    let mut flow: Option<FlowField> = None;
    for (p, c) in pyr.iter().rev() {
        let mut f = match flow {
            None => FlowField::zeros(p.width, p.height),
            Some(coarse) => {
                let (u, v) = (coarse.component(0), coarse.component(1));
                let mut f = FlowField::zeros(p.width, p.height);
                for y in 0..p.height {
                    for x in 0..p.width {
                        let sx = (x as f64 + 0.5) / 2.0 - 0.5;
                        let sy = (y as f64 + 0.5) / 2.0 - 0.5;
                        f.data[y * p.width + x] = [2.0 * u.sample(sx, sy), 2.0 * v.sample(sx, sy)];
                    }
                }
                f
            }
        };
        refine_level(p, c, &mut f.data, r, cfg.iterations);
        flow = Some(f);
    }
    let flow = flow.expect("at least one pyramid level");
    if flow.data.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Format("non-finite flow".into()));
    }
    Ok(flow)
}

pub fn dense_flow(prev: &Frame, cur: &Frame, cfg: &FlowConfig) -> Result<FlowField> {
    if prev.dims() != cur.dims() {
        return Err(Error::dims(prev.dims(), cur.dims()));
    }
    dense_flow_gray(&prev.gray(), &cur.gray(), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texture(x: f64, y: f64) -> f64 {
        0.5 + 0.15 * (0.35 * x + 0.1 * y).sin()
            + 0.12 * (0.23 * y - 0.05 * x).cos()
            + 0.08 * (0.61 * x + 0.47 * y).sin() * (0.19 * y).cos()
    }

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    }

    #[test]
    fn identical_frames_give_zero_flow() {
        let img = GrayImage::from_fn(40, 30, |x, y| texture(x as f64, y as f64));
        let f = dense_flow_gray(&img, &img, &FlowConfig::default()).unwrap();
        assert!(f.data.iter().flatten().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn horizontal_shift_is_recovered() {
        let prev = GrayImage::from_fn(96, 72, |x, y| texture(x as f64, y as f64));
        let cur = GrayImage::from_fn(96, 72, |x, y| texture(x as f64 - 3.0, y as f64));
        let f = dense_flow_gray(&prev, &cur, &FlowConfig::default()).unwrap();
        // interior pixels, away from the clamped border
        let inner: Vec<[f64; 2]> = (12..60)
            .flat_map(|y| (12..84).map(move |x| (x, y)))
            .map(|(x, y)| f.get(x, y))
            .filter(|d| d[0] != 0.0 || d[1] != 0.0)
            .collect();
        let mx = median(inner.iter().map(|d| d[0]).collect());
        let my = median(inner.iter().map(|d| d[1]).collect());
        assert!((mx - 3.0).abs() < 0.25, "median dx {mx}");
        assert!(my.abs() < 0.25, "median dy {my}");
    }

    #[test]
    fn flat_image_is_ill_conditioned() {
        let img = GrayImage::from_fn(30, 30, |_, _| 0.5);
        let other = GrayImage::from_fn(30, 30, |_, _| 0.6);
        let f = dense_flow_gray(&img, &other, &FlowConfig::default()).unwrap();
        assert!(f.data.iter().all(|d| *d == [0.0, 0.0]));
    }

    #[test]
    fn dimension_mismatch() {
        let a = GrayImage::new(10, 10);
        let b = GrayImage::new(11, 10);
        assert!(dense_flow_gray(&a, &b, &FlowConfig::default()).is_err());
    }
}
