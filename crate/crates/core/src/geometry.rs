//! Court model, image/court homographies and the dense court grid.
//!
//! Court coordinates are meters with the origin at the near-left court corner,
//! `x` running across the court and `y` along it (away from the camera).

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const HORIZON_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImagePoint {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CourtPoint {
    pub x: f64,
    pub y: f64,
}

impl ImagePoint {
    pub fn new(x: f64, y: f64) -> Self {
        ImagePoint { x, y }
    }

    pub fn distance(&self, other: &ImagePoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl CourtPoint {
    pub fn new(x: f64, y: f64) -> Self {
        CourtPoint { x, y }
    }

    pub fn distance(&self, other: &CourtPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CourtModel {
    pub length_m: f64,
    pub width_m: f64,
    pub margin_m: f64,
    pub net_y: f64,
}

impl Default for CourtModel {
    fn default() -> Self {
        CourtModel {
            length_m: 18.0,
            width_m: 9.0,
            margin_m: 1.0,
            net_y: 9.0,
        }
    }
}

impl CourtModel {
    pub fn new(length_m: f64, width_m: f64, margin_m: f64, net_y: f64) -> Result<Self> {
        let c = CourtModel {
            length_m,
            width_m,
            margin_m,
            net_y,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.length_m > 0.0
            && self.width_m > 0.0
            && self.margin_m >= 0.0
            && self.net_y > 0.0
            && self.net_y < self.length_m;
        if ok {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(format!("invalid court model {self:?}")))
        }
    }

    /// Width of the gridded floor (court plus run-out on both sides).
    pub fn extent_x(&self) -> f64 {
        self.width_m + 2.0 * self.margin_m
    }

    pub fn extent_y(&self) -> f64 {
        self.length_m + 2.0 * self.margin_m
    }

    /// Maps a court point to [0, 1]² over court plus margin.
    pub fn normalize(&self, q: CourtPoint) -> (f64, f64) {
        (
            (q.x + self.margin_m) / self.extent_x(),
            (q.y + self.margin_m) / self.extent_y(),
        )
    }

    pub fn contains(&self, q: CourtPoint) -> bool {
        let (u, v) = self.normalize(q);
        (0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v)
    }
}

/// A correspondence between an image pixel and a court position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub image: ImagePoint,
    pub court: CourtPoint,
}

/// Projective map from image pixels to court meters, with its inverse cached.
#[derive(Debug, Clone, PartialEq)]
pub struct Homography {
    h: Matrix3<f64>,
    inv: Matrix3<f64>,
}

#[derive(Debug, Clone)]
pub struct HomographyFit {
    pub homography: Homography,
    /// RMS distance in meters between projected image points and their court points.
    pub rms_residual: f64,
}

impl Homography {
    pub fn identity() -> Self {
        Homography {
            h: Matrix3::identity(),
            inv: Matrix3::identity(),
        }
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        let m = Matrix3::from_fn(|r, c| rows[r][c]);
        Self::from_matrix(m)
    }

    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::DegenerateConfiguration("non-finite matrix".into()));
        }
        let scale = if m[(2, 2)].abs() > 1e-12 { m[(2, 2)] } else { m.norm() };
        let h = m / scale;
        if h.determinant().abs() < 1e-15 {
            return Err(Error::DegenerateConfiguration("singular homography".into()));
        }
        let inv = h
            .try_inverse()
            .ok_or_else(|| Error::DegenerateConfiguration("singular homography".into()))?;
        Ok(Homography { h, inv })
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.h
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        let mut r = [[0.0; 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.h[(i, j)];
            }
        }
        r
    }

    pub fn inverse(&self) -> Homography {
        Homography::from_matrix(self.inv).expect("inverse of a valid homography is valid")
    }

    fn apply(m: &Matrix3<f64>, x: f64, y: f64) -> Result<(f64, f64)> {
        let v = m * Vector3::new(x, y, 1.0);
        if v.z.abs() < HORIZON_EPS {
            return Err(Error::PointAtHorizon(v.z));
        }
        Ok((v.x / v.z, v.y / v.z))
    }

    /// Image pixel to court meters.
    pub fn project(&self, p: ImagePoint) -> Result<CourtPoint> {
        let (x, y) = Self::apply(&self.h, p.x, p.y)?;
        Ok(CourtPoint { x, y })
    }

    /// Court meters to image pixel.
    pub fn unproject(&self, q: CourtPoint) -> Result<ImagePoint> {
        let (x, y) = Self::apply(&self.inv, q.x, q.y)?;
        Ok(ImagePoint { x, y })
    }

    /// Nine row-major decimals, one row per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in 0..3 {
            let _ = writeln!(s, "{:e} {:e} {:e}", self.h[(r, 0)], self.h[(r, 1)], self.h[(r, 2)]);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let vals: Vec<f64> = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(str::split_whitespace)
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad homography entry `{t}`")))
            })
            .collect::<Result<_>>()?;
        if vals.len() != 9 {
            return Err(Error::Format(format!(
                "homography needs 9 numbers, found {}",
                vals.len()
            )));
        }
        Self::from_matrix(Matrix3::from_row_slice(&vals))
    }
}

/// Similarity transform moving the centroid to the origin with mean distance √2.
fn conditioning(points: &[(f64, f64)]) -> Matrix3<f64> {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mean_d = points.iter().map(|p| (p.0 - cx).hypot(p.1 - cy)).sum::<f64>() / n;
    let s = if mean_d > 0.0 {
        std::f64::consts::SQRT_2 / mean_d
    } else {
        1.0
    };
    Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0)
}

/// Normalized direct linear transform over image→court correspondences.
pub fn fit_homography(pairs: &[Correspondence]) -> Result<HomographyFit> {
    if pairs.len() < 4 {
        return Err(Error::DegenerateConfiguration(format!(
            "need at least 4 correspondences, got {}",
            pairs.len()
        )));
    }
    let src: Vec<(f64, f64)> = pairs.iter().map(|p| (p.image.x, p.image.y)).collect();
    let dst: Vec<(f64, f64)> = pairs.iter().map(|p| (p.court.x, p.court.y)).collect();
    let ts = conditioning(&src);
    let td = conditioning(&dst);

    // padded to at least 9 rows so the thin SVD exposes the null vector
    let rows = (2 * pairs.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (s, d)) in src.iter().zip(&dst).enumerate() {
        let ps = ts * Vector3::new(s.0, s.1, 1.0);
        let pd = td * Vector3::new(d.0, d.1, 1.0);
        let (x, y) = (ps.x, ps.y);
        let (u, v) = (pd.x, pd.y);
        let r = 2 * i;
        a.row_mut(r)
            .copy_from_slice(&[-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u]);
        a.row_mut(r + 1)
            .copy_from_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
    }

    let svd = a.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::DegenerateConfiguration("SVD failed".into()))?;
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[i].total_cmp(&sv[j]));
    let (smallest, second) = (order[0], order[1]);
    if sv[second] <= 1e-10 * sv.max() {
        return Err(Error::DegenerateConfiguration("design matrix is rank-deficient".into()));
    }
    let hv: Vec<f64> = v_t.row(smallest).iter().copied().collect();
    let hn = Matrix3::from_row_slice(&hv);
    let td_inv = td
        .try_inverse()
        .ok_or_else(|| Error::DegenerateConfiguration("degenerate court points".into()))?;
    let homography = Homography::from_matrix(td_inv * hn * ts)?;

    let mut sq = 0.0;
    for p in pairs {
        let q = homography.project(p.image)?;
        sq += (q.x - p.court.x).powi(2) + (q.y - p.court.y).powi(2);
    }
    Ok(HomographyFit {
        homography,
        rms_residual: (sq / pairs.len() as f64).sqrt(),
    })
}

/// Parses `u v X Y` lines; `#` starts a comment.
pub fn parse_calibration(text: &str) -> Result<Vec<Correspondence>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let nums: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                path: "<calibration>".into(),
                line: i + 1,
                message: format!("{e}"),
            })?;
        if nums.len() != 4 {
            return Err(Error::Parse {
                path: "<calibration>".into(),
                line: i + 1,
                message: format!("expected `u v X Y`, found {} fields", nums.len()),
            });
        }
        out.push(Correspondence {
            image: ImagePoint::new(nums[0], nums[1]),
            court: CourtPoint::new(nums[2], nums[3]),
        });
    }
    Ok(out)
}

pub fn format_calibration(pairs: &[Correspondence]) -> String {
    let mut s = String::from("# u v X Y  (image pixels, court meters)\n");
    for p in pairs {
        let _ = writeln!(s, "{} {} {} {}", p.image.x, p.image.y, p.court.x, p.court.y);
    }
    s
}

pub fn read_calibration(path: &Path) -> Result<Vec<Correspondence>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_calibration(&text).map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::Parse {
            path: path.display().to_string(),
            line,
            message,
        },
        other => other,
    })
}

/// Axis-aligned image rectangle in pixels, `(x, y)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageRect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

/// Integer pixel span `[x0, x1) x [y0, y1)`, possibly outside the frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelBounds {
    pub x0: isize,
    pub y0: isize,
    pub x1: isize,
    pub y1: isize,
}

impl PixelBounds {
    pub fn area(&self) -> usize {
        ((self.x1 - self.x0).max(0) * (self.y1 - self.y0).max(0)) as usize
    }

    pub fn clip(&self, width: usize, height: usize) -> PixelBounds {
        PixelBounds {
            x0: self.x0.clamp(0, width as isize),
            y0: self.y0.clamp(0, height as isize),
            x1: self.x1.clamp(0, width as isize),
            y1: self.y1.clamp(0, height as isize),
        }
    }
}

impl ImageRect {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        ImageRect { x, y, w, h }
    }

    pub fn bottom_center(&self) -> ImagePoint {
        ImagePoint::new(self.x + self.w / 2.0, self.y + self.h)
    }

    /// Rounded pixel span, at least one pixel wide and tall.
    pub fn pixel_bounds(&self) -> PixelBounds {
        let x0 = self.x.round() as isize;
        let y0 = self.y.round() as isize;
        let x1 = ((self.x + self.w).round() as isize).max(x0 + 1);
        let y1 = ((self.y + self.h).round() as isize).max(y0 + 1);
        PixelBounds { x0, y0, x1, y1 }
    }
}

/// Player-sized image rectangle standing on court point `q`.
pub fn scaled_rect(h: &Homography, q: CourtPoint, player_width_m: f64, player_height_m: f64) -> Result<ImageRect> {
    let half = player_width_m / 2.0;
    let base = h.unproject(q)?;
    let left = h.unproject(CourtPoint::new(q.x - half, q.y))?;
    let right = h.unproject(CourtPoint::new(q.x + half, q.y))?;
    let w = left.distance(&right);
    let px_per_m = w / player_width_m;
    let hh = player_height_m * px_per_m;
    Ok(ImageRect::new(base.x - w / 2.0, base.y - hh, w, hh))
}

/// 1-based bin coordinates over the court grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BinIndex {
    pub ix: usize,
    pub iy: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CourtGrid {
    pub court: CourtModel,
    pub spacing_x_m: f64,
    pub spacing_y_m: f64,
    pub bins_x: usize,
    pub bins_y: usize,
    pub points: Vec<CourtPoint>,
}

fn axis_samples(extent: f64, spacing: f64, offset: f64) -> Vec<f64> {
    let n = ((extent / spacing) + 1e-9).floor().max(1.0) as usize;
    let pad = (extent - n as f64 * spacing).max(0.0) / 2.0;
    (0..n).map(|i| offset + pad + (i as f64 + 0.5) * spacing).collect()
}

pub fn make_grid(court: &CourtModel, spacing: f64, bins_x: usize, bins_y: usize) -> Result<CourtGrid> {
    make_grid_xy(court, spacing, spacing, bins_x, bins_y)
}

pub fn make_grid_xy(
    court: &CourtModel,
    spacing_x: f64,
    spacing_y: f64,
    bins_x: usize,
    bins_y: usize,
) -> Result<CourtGrid> {
    court.validate()?;
    if bins_x == 0 || bins_y == 0 {
        return Err(Error::EmptyGrid);
    }
    if !(spacing_x > 0.0 && spacing_y > 0.0) {
        return Err(Error::ConfigInvalid("grid spacing must be positive".into()));
    }
    let ex = court.extent_x() / bins_x as f64;
    let ey = court.extent_y() / bins_y as f64;
    for (axis, extent) in [("x", ex), ("y", ey)] {
        if !(0.5 - 1e-9..=1.0 + 1e-9).contains(&extent) {
            return Err(Error::BinExtentOutOfRange { axis, extent });
        }
    }
    let xs = axis_samples(court.extent_x(), spacing_x, -court.margin_m);
    let ys = axis_samples(court.extent_y(), spacing_y, -court.margin_m);
    let points = ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| CourtPoint::new(x, y)))
        .collect();
    Ok(CourtGrid {
        court: *court,
        spacing_x_m: spacing_x,
        spacing_y_m: spacing_y,
        bins_x,
        bins_y,
        points,
    })
}

impl CourtGrid {
    pub fn bin_count(&self) -> usize {
        self.bins_x * self.bins_y
    }

    pub fn bin_extent(&self) -> (f64, f64) {
        (
            self.court.extent_x() / self.bins_x as f64,
            self.court.extent_y() / self.bins_y as f64,
        )
    }

    /// Floor binning of the normalized coordinate; a coordinate of exactly 1
    /// lands in the last bin. `None` outside court plus margin.
    pub fn bin_index(&self, q: CourtPoint) -> Option<BinIndex> {
        let (u, v) = self.court.normalize(q);
        if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
            return None;
        }
        let ix = ((u * self.bins_x as f64).floor() as usize).min(self.bins_x - 1);
        let iy = ((v * self.bins_y as f64).floor() as usize).min(self.bins_y - 1);
        Some(BinIndex { ix: ix + 1, iy: iy + 1 })
    }

    /// Row-major (y rows, x columns) 0-based offset.
    pub fn flat(&self, b: BinIndex) -> usize {
        (b.iy - 1) * self.bins_x + (b.ix - 1)
    }

    pub fn flat_bin(&self, q: CourtPoint) -> Option<usize> {
        self.bin_index(q).map(|b| self.flat(b))
    }

    /// Flat bin of every grid point, in point order.
    pub fn point_bins(&self) -> Vec<usize> {
        self.points
            .iter()
            .map(|&q| self.flat_bin(q).expect("grid points lie inside the court"))
            .collect()
    }
}
