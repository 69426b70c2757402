//! Spatial-context (SC) and activity-context (AC) descriptors over the court grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activity::Activity;
use crate::error::{Error, Result};
use crate::geometry::{scaled_rect, CourtGrid, Homography, ImageRect, PixelBounds};
use crate::raster::encode_pgm;
use crate::segmentation::{PlayerDetection, ProbabilityMap};

/// Real-world size of the rectangle a standing player fills.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlayerDims {
    pub width_m: f64,
    pub height_m: f64,
}

impl Default for PlayerDims {
    fn default() -> Self {
        PlayerDims {
            width_m: 0.7,
            height_m: 1.9,
        }
    }
}

/// `bins_x * bins_y` mean fill values, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScDescriptor {
    pub bins_x: usize,
    pub bins_y: usize,
    pub values: Vec<f64>,
}

/// One `bins_x * bins_y` row-major map per activity, stacked in class order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcDescriptor {
    pub bins_x: usize,
    pub bins_y: usize,
    pub k: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDetection {
    pub detection: PlayerDetection,
    /// Calibrated per-class scores in `Activity::ALL` order.
    pub scores: [f64; Activity::COUNT],
}

/// Sum of P_player over the clipped rectangle divided by its unclipped area.
pub fn fill_percentage(p: &ProbabilityMap, rect: &ImageRect) -> Result<f64> {
    if !(rect.w > 0.0 && rect.h > 0.0) {
        return Err(Error::ZeroArea);
    }
    let b = rect.pixel_bounds();
    let c = b.clip(p.width, p.height);
    let mut sum = 0.0;
    for y in c.y0..c.y1 {
        for x in c.x0..c.x1 {
            sum += p.get(x as usize, y as usize);
        }
    }
    Ok(sum / b.area() as f64)
}

struct Integral {
    w: usize,
    sat: Vec<f64>,
}

impl Integral {
    fn new(p: &ProbabilityMap) -> Self {
        let (w, h) = p.dims();
        let mut sat = vec![0.0; (w + 1) * (h + 1)];
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                row += p.data[y * w + x];
                sat[(y + 1) * (w + 1) + x + 1] = sat[y * (w + 1) + x + 1] + row;
            }
        }
        Integral { w, sat }
    }

    fn sum(&self, c: &PixelBounds) -> f64 {
        let s = |x: isize, y: isize| self.sat[y as usize * (self.w + 1) + x as usize];
        if c.x1 <= c.x0 || c.y1 <= c.y0 {
            return 0.0;
        }
        s(c.x1, c.y1) - s(c.x0, c.y1) - s(c.x1, c.y0) + s(c.x0, c.y0)
    }
}

/// Per-grid-point fill rectangles for one calibrated view; reusable across frames.
#[derive(Debug, Clone)]
pub struct ScSampler {
    bins_x: usize,
    bins_y: usize,
    bounds: Vec<PixelBounds>,
    bins: Vec<usize>,
    counts: Vec<usize>,
}

impl ScSampler {
    pub fn new(h: &Homography, grid: &CourtGrid, dims: PlayerDims) -> Result<Self> {
        if grid.bin_count() == 0 || grid.points.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let bounds = grid
            .points
            .iter()
            .map(|&q| {
                let r = scaled_rect(h, q, dims.width_m, dims.height_m)?;
                if !(r.w > 0.0 && r.h > 0.0) {
                    return Err(Error::ZeroArea);
                }
                Ok(r.pixel_bounds())
            })
            .collect::<Result<Vec<_>>>()?;
        let bins = grid.point_bins();
        let mut counts = vec![0; grid.bin_count()];
        for &b in &bins {
            counts[b] += 1;
        }
        Ok(ScSampler {
            bins_x: grid.bins_x,
            bins_y: grid.bins_y,
            bounds,
            bins,
            counts,
        })
    }

    /// Fill value of every grid point, in grid order.
    pub fn point_values(&self, p: &ProbabilityMap) -> Vec<f64> {
        let ii = Integral::new(p);
        self.bounds
            .iter()
            .map(|b| ii.sum(&b.clip(p.width, p.height)) / b.area() as f64)
            .collect()
    }

    pub fn descriptor(&self, p: &ProbabilityMap) -> ScDescriptor {
        let mut values = vec![0.0; self.bins_x * self.bins_y];
        for (v, &b) in self.point_values(p).iter().zip(&self.bins) {
            values[b] += v;
        }
        for (v, &n) in values.iter_mut().zip(&self.counts) {
            if n > 0 {
                *v /= n as f64;
            }
        }
        ScDescriptor {
            bins_x: self.bins_x,
            bins_y: self.bins_y,
            values,
        }
    }
}

pub fn sc_descriptor(p: &ProbabilityMap, h: &Homography, grid: &CourtGrid, dims: PlayerDims) -> Result<ScDescriptor> {
    Ok(ScSampler::new(h, grid, dims)?.descriptor(p))
}

/// SC of many frames sharing one view.
pub fn sc_descriptors(
    maps: &[ProbabilityMap],
    h: &Homography,
    grid: &CourtGrid,
    dims: PlayerDims,
) -> Result<Vec<ScDescriptor>> {
    let s = ScSampler::new(h, grid, dims)?;
    Ok(maps.par_iter().map(|p| s.descriptor(p)).collect())
}

/// Scores of one frame's detections deposited into their bins; detections
/// sharing a bin are averaged. Class-major layout as in `AcDescriptor`.
pub fn frame_score_map(dets: &[ScoredDetection], grid: &CourtGrid) -> Vec<f64> {
    let nb = grid.bin_count();
    let mut sum = vec![0.0; nb * Activity::COUNT];
    let mut count = vec![0usize; nb];
    for d in dets {
        let Some(b) = grid.flat_bin(d.detection.court_position) else {
            continue;
        };
        count[b] += 1;
        for (a, s) in d.scores.iter().enumerate() {
            sum[a * nb + b] += s;
        }
    }
    for a in 0..Activity::COUNT {
        for b in 0..nb {
            if count[b] > 1 {
                sum[a * nb + b] /= count[b] as f64;
            }
        }
    }
    sum
}

/// Averages the last `min(k, len)` per-frame maps with fixed denominator `k`;
/// missing leading frames count as empty.
pub fn ac_from_maps<M: AsRef<[f64]>>(maps: &[M], grid: &CourtGrid, k: usize) -> Result<AcDescriptor> {
    let nb = grid.bin_count();
    if nb == 0 {
        return Err(Error::EmptyGrid);
    }
    if k == 0 {
        return Err(Error::ConfigInvalid("AC window k must be at least 1".into()));
    }
    // running mean over the zero-padded window: exact for constant scores
    let mut values = vec![0.0; nb * Activity::COUNT];
    let window = &maps[maps.len().saturating_sub(k)..];
    let pad = k - window.len();
    for (i, m) in window.iter().enumerate() {
        let m = m.as_ref();
        if m.len() != values.len() {
            return Err(Error::len(values.len(), m.len()));
        }
        let n = (pad + i + 1) as f64;
        for (v, s) in values.iter_mut().zip(m) {
            *v += (s - *v) / n;
        }
    }
    Ok(AcDescriptor {
        bins_x: grid.bins_x,
        bins_y: grid.bins_y,
        k,
        values,
    })
}

/// `history` is oldest first and should end with the frame just before the
/// evaluated one.
pub fn ac_descriptor(history: &[Vec<ScoredDetection>], grid: &CourtGrid, k: usize) -> Result<AcDescriptor> {
    if grid.bin_count() == 0 {
        return Err(Error::EmptyGrid);
    }
    let start = history.len().saturating_sub(k);
    let maps: Vec<Vec<f64>> = history[start..].iter().map(|f| frame_score_map(f, grid)).collect();
    ac_from_maps(&maps, grid, k)
}

impl ScDescriptor {
    pub fn flatten(&self) -> Vec<f64> {
        self.values.clone()
    }

    pub fn from_flat(bins_x: usize, bins_y: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != bins_x * bins_y {
            return Err(Error::len(bins_x * bins_y, values.len()));
        }
        Ok(ScDescriptor { bins_x, bins_y, values })
    }

    /// `ix`, `iy` are 1-based.
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[(iy - 1) * self.bins_x + ix - 1]
    }

    /// Graymap with one pixel per bin, court far side at the top.
    pub fn to_pgm(&self) -> Vec<u8> {
        encode_pgm(self.bins_x, self.bins_y, &flip_rows(&self.values, self.bins_x))
    }
}

impl AcDescriptor {
    pub fn flatten(&self) -> Vec<f64> {
        self.values.clone()
    }

    pub fn from_flat(bins_x: usize, bins_y: usize, k: usize, values: Vec<f64>) -> Result<Self> {
        let n = bins_x * bins_y * Activity::COUNT;
        if values.len() != n {
            return Err(Error::len(n, values.len()));
        }
        Ok(AcDescriptor {
            bins_x,
            bins_y,
            k,
            values,
        })
    }

    pub fn get(&self, ix: usize, iy: usize, a: Activity) -> f64 {
        let nb = self.bins_x * self.bins_y;
        self.values[a.index() * nb + (iy - 1) * self.bins_x + ix - 1]
    }

    pub fn channel(&self, a: Activity) -> &[f64] {
        let nb = self.bins_x * self.bins_y;
        &self.values[a.index() * nb..(a.index() + 1) * nb]
    }

    pub fn channel_pgm(&self, a: Activity) -> Vec<u8> {
        encode_pgm(self.bins_x, self.bins_y, &flip_rows(self.channel(a), self.bins_x))
    }
}

fn flip_rows(v: &[f64], w: usize) -> Vec<f64> {
    v.chunks(w).rev().flatten().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_grid, CourtModel, CourtPoint, ImagePoint};
    use crate::segmentation::MapKind;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn det(x: f64, y: f64) -> PlayerDetection {
        PlayerDetection {
            court_position: CourtPoint::new(x, y),
            image_blob: ImageRect::new(0.0, 0.0, 1.0, 1.0),
            feet: ImagePoint::new(0.0, 0.0),
            mass: 1.0,
        }
    }

    fn scored(x: f64, y: f64, s: [f64; 7]) -> ScoredDetection {
        ScoredDetection {
            detection: det(x, y),
            scores: s,
        }
    }

    fn grid() -> CourtGrid {
        make_grid(&CourtModel::default(), 0.25, 15, 20).unwrap()
    }

    // simple top-down view, 20 px per meter, court far side at the top
    fn view() -> Homography {
        let s = 20.0;
        Homography::from_rows([[1.0 / s, 0.0, -1.5], [0.0, -1.0 / s, 21.0], [0.0, 0.0, 1.0]]).unwrap()
    }

    fn random_map(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ProbabilityMap {
        let data = (0..w * h).map(|_| rng.random::<f64>()).collect();
        ProbabilityMap::from_data(w, h, MapKind::Player, data).unwrap()
    }

    #[test]
    fn fill_of_zero_and_uniform_maps() {
        let r = ImageRect::new(3.2, 4.7, 5.5, 8.1);
        let z = ProbabilityMap::filled(20, 20, MapKind::Player, 0.0);
        assert_eq!(fill_percentage(&z, &r).unwrap(), 0.0);
        let u = ProbabilityMap::filled(20, 20, MapKind::Player, 0.7);
        assert!((fill_percentage(&u, &r).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn fill_uses_unclipped_area() {
        let u = ProbabilityMap::filled(10, 10, MapKind::Player, 1.0);
        let r = ImageRect::new(5.0, 0.0, 10.0, 10.0);
        assert!((fill_percentage(&u, &r).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(
            fill_percentage(&u, &ImageRect::new(0.0, 0.0, 0.0, 3.0)),
            Err(Error::ZeroArea)
        ));
    }

    #[test]
    fn fill_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let p = random_map(&mut rng, 31, 23);
            let r = ImageRect::new(
                rng.random_range(-5.0..30.0),
                rng.random_range(-5.0..22.0),
                rng.random_range(0.5..15.0),
                rng.random_range(0.5..15.0),
            );
            let b = r.pixel_bounds();
            let mut s = 0.0;
            for y in 0..23isize {
                for x in 0..31isize {
                    if x >= b.x0 && x < b.x1 && y >= b.y0 && y < b.y1 {
                        s += p.get(x as usize, y as usize);
                    }
                }
            }
            let area = ((b.x1 - b.x0) * (b.y1 - b.y0)) as f64;
            assert_eq!(fill_percentage(&p, &r).unwrap(), s / area);
        }
    }

    #[test]
    fn sc_uniform_map_is_constant() {
        let g = grid();
        let p = ProbabilityMap::filled(440, 440, MapKind::Player, 0.37);
        let sc = sc_descriptor(&p, &view(), &g, PlayerDims::default()).unwrap();
        assert_eq!(sc.values.len(), 300);
        assert!(sc.values.iter().all(|v| (v - 0.37).abs() < 1e-6));
    }

    #[test]
    fn sc_matches_dense_then_binned_oracle() {
        let g = grid();
        let h = view();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_map(&mut rng, 440, 440);
        let sc = sc_descriptor(&p, &h, &g, PlayerDims::default()).unwrap();
        let mut sum = vec![0.0; 300];
        let mut n = vec![0.0; 300];
        for &q in &g.points {
            let r = scaled_rect(&h, q, 0.7, 1.9).unwrap();
            let v = fill_percentage(&p, &r).unwrap();
            let (u, w) = g.court.normalize(q);
            let ix = ((u * 15.0).floor() as usize).min(14);
            let iy = ((w * 20.0).floor() as usize).min(19);
            sum[iy * 15 + ix] += v;
            n[iy * 15 + ix] += 1.0;
        }
        for i in 0..300 {
            assert!((sc.values[i] - sum[i] / n[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn sc_blob_spreads_over_neighbours() {
        let g = grid();
        let h = view();
        let mut p = ProbabilityMap::filled(440, 440, MapKind::Player, 0.0);
        // player standing at court (4.5, 3.0)
        for y in 322..360 {
            for x in 113..127 {
                p.data[y * 440 + x] = 1.0;
            }
        }
        let sc = sc_descriptor(&p, &h, &g, PlayerDims::default()).unwrap();
        let lit = sc.values.iter().filter(|v| **v > 0.0).count();
        assert!(lit > 1, "{lit} bins lit");
        assert!(sc.values.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn ac_constant_score() {
        let g = grid();
        let s = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7];
        let hist: Vec<Vec<ScoredDetection>> = (0..40).map(|_| vec![scored(4.5, 9.5, s)]).collect();
        let ac = ac_descriptor(&hist, &g, 40).unwrap();
        let b = g.flat_bin(CourtPoint::new(4.5, 9.5)).unwrap();
        for a in Activity::ALL {
            for (i, v) in ac.channel(a).iter().enumerate() {
                assert_eq!(*v, if i == b { s[a.index()] } else { 0.0 });
            }
        }
    }

    #[test]
    fn ac_partial_presence_and_short_history() {
        let g = grid();
        let s = [0.5; 7];
        let mut hist: Vec<Vec<ScoredDetection>> = vec![Vec::new(); 10];
        for f in [1, 4, 7] {
            hist[f] = vec![scored(2.0, 2.0, s)];
        }
        let ac = ac_descriptor(&hist, &g, 10).unwrap();
        let b = g.flat_bin(CourtPoint::new(2.0, 2.0)).unwrap();
        assert!((ac.channel(Activity::Block)[b] - 3.0 * 0.5 / 10.0).abs() < 1e-12);
        // only 10 frames available under k = 20: denominator stays 20
        let ac = ac_descriptor(&hist, &g, 20).unwrap();
        assert!((ac.channel(Activity::Block)[b] - 3.0 * 0.5 / 20.0).abs() < 1e-12);
    }

    #[test]
    fn ac_same_bin_detections_are_averaged() {
        let g = grid();
        let hist = vec![vec![scored(2.0, 2.0, [1.0; 7]), scored(2.05, 2.05, [0.0; 7])]];
        let ac = ac_descriptor(&hist, &g, 1).unwrap();
        let b = g.flat_bin(CourtPoint::new(2.0, 2.0)).unwrap();
        assert_eq!(ac.channel(Activity::Stand)[b], 0.5);
    }

    #[test]
    fn ac_rejects_zero_window() {
        assert!(ac_descriptor(&[], &grid(), 0).is_err());
        let ac = ac_descriptor(&[], &grid(), 5).unwrap();
        assert!(ac.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn flatten_shapes_round_trip() {
        let g = grid();
        let ac = ac_descriptor(&[vec![scored(1.0, 1.0, [0.3; 7])]], &g, 3).unwrap();
        let flat = ac.flatten();
        assert_eq!(flat.len(), 2100);
        assert_eq!(AcDescriptor::from_flat(15, 20, 3, flat).unwrap(), ac);
        let sc = ScDescriptor::from_flat(15, 20, vec![0.25; 300]).unwrap();
        assert_eq!(ScDescriptor::from_flat(15, 20, sc.flatten()).unwrap(), sc);
        assert!(ScDescriptor::from_flat(15, 20, vec![0.0; 299]).is_err());
    }

    #[test]
    fn pgm_export_sizes() {
        let sc = ScDescriptor::from_flat(15, 20, vec![0.5; 300]).unwrap();
        assert!(sc.to_pgm().starts_with(b"P5\n15 20\n255\n"));
        let ac = AcDescriptor::from_flat(15, 20, 1, vec![0.0; 2100]).unwrap();
        assert_eq!(ac.channel_pgm(Activity::Attack).len(), 13 + 300);
    }

    fn arb_frame() -> impl Strategy<Value = Vec<ScoredDetection>> {
        prop::collection::vec(
            (-1.0f64..10.0, -1.0f64..19.0, prop::array::uniform7(0.0f64..=1.0)).prop_map(|(x, y, s)| scored(x, y, s)),
            0..4,
        )
    }

    proptest! {
        #[test]
        fn ac_window_composition(
            w1 in prop::collection::vec(arb_frame(), 1..6),
            w2 in prop::collection::vec(arb_frame(), 1..6),
        ) {
            let g = grid();
            let (k1, k2) = (w1.len(), w2.len());
            let a1 = ac_descriptor(&w1, &g, k1).unwrap();
            let a2 = ac_descriptor(&w2, &g, k2).unwrap();
            let all: Vec<_> = w1.iter().chain(&w2).cloned().collect();
            let u = ac_descriptor(&all, &g, k1 + k2).unwrap();
            let (f1, f2) = (k1 as f64 / (k1 + k2) as f64, k2 as f64 / (k1 + k2) as f64);
            for i in 0..u.values.len() {
                prop_assert!((u.values[i] - (f1 * a1.values[i] + f2 * a2.values[i])).abs() < 1e-12);
            }
        }

        #[test]
        fn ac_bounded_and_linear(frames in prop::collection::vec(arb_frame(), 1..8), lambda in 0.0f64..=1.0) {
            let g = grid();
            let k = frames.len();
            let a = ac_descriptor(&frames, &g, k).unwrap();
            prop_assert!(a.values.iter().all(|v| (0.0..=1.0).contains(v)));
            let scaled: Vec<Vec<ScoredDetection>> = frames
                .iter()
                .map(|f| f.iter().map(|d| scored(d.detection.court_position.x, d.detection.court_position.y, d.scores.map(|s| s * lambda))).collect())
                .collect();
            let b = ac_descriptor(&scaled, &g, k).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((y - lambda * x).abs() < 1e-12);
            }
        }

        #[test]
        fn ac_single_frame_is_binned_scores(frame in arb_frame()) {
            let g = grid();
            let a = ac_descriptor(std::slice::from_ref(&frame), &g, 1).unwrap();
            prop_assert_eq!(a.values, frame_score_map(&frame, &g));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn sc_bounded_and_monotone(seed in any::<u64>(), bump in 0.0f64..0.5) {
            let g = make_grid(&CourtModel::default(), 0.5, 15, 20).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = 440;
            let p = ProbabilityMap::from_data(w, w, MapKind::Player, (0..w * w).map(|_| rng.random::<f64>() * 0.5).collect()).unwrap();
            let q = ProbabilityMap::from_data(w, w, MapKind::Player, p.data.iter().map(|v| v + bump * rng.random::<f64>()).collect()).unwrap();
            let s = ScSampler::new(&view(), &g, PlayerDims::default()).unwrap();
            let (a, b) = (s.descriptor(&p), s.descriptor(&q));
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((0.0..=1.0).contains(x));
                prop_assert!(*y >= *x - 1e-12);
            }
        }
    }
}
