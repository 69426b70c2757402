use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Correspondence, CourtModel, CourtPoint, Homography, ImagePoint};

/// Pinhole camera over the court; world z points up, the court lies in z = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    pub position: [f64; 3],
    pub look_at: [f64; 3],
    /// Focal length in pixels; the principal point is the image center.
    pub focal_px: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        CameraConfig {
            position: [4.5, -5.0, 13.0],
            look_at: [4.5, 8.0, 0.0],
            focal_px: 320.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    center: Vector3<f64>,
    right: Vector3<f64>,
    down: Vector3<f64>,
    forward: Vector3<f64>,
    f: f64,
    cx: f64,
    cy: f64,
}

impl Camera {
    pub fn new(cfg: &CameraConfig, width: usize, height: usize) -> Result<Self> {
        let center = Vector3::from(cfg.position);
        let forward = (Vector3::from(cfg.look_at) - center).try_normalize(1e-12);
        let forward = forward.ok_or_else(|| Error::ConfigInvalid("camera looks at itself".into()))?;
        let right = forward
            .cross(&Vector3::z())
            .try_normalize(1e-9)
            .ok_or_else(|| Error::ConfigInvalid("camera must not look straight down".into()))?;
        if !(cfg.focal_px > 0.0) || cfg.position[2] <= 0.0 {
            return Err(Error::ConfigInvalid(
                "camera needs positive focal length and height".into(),
            ));
        }
        Ok(Camera {
            center,
            right,
            down: forward.cross(&right),
            forward,
            f: cfg.focal_px,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
        })
    }

    /// `None` behind the camera.
    pub fn project(&self, p: [f64; 3]) -> Option<ImagePoint> {
        let d = Vector3::from(p) - self.center;
        let z = d.dot(&self.forward);
        if z <= 1e-9 {
            return None;
        }
        Some(ImagePoint::new(
            self.cx + self.f * d.dot(&self.right) / z,
            self.cy + self.f * d.dot(&self.down) / z,
        ))
    }

    /// Court-to-image matrix for the ground plane.
    fn ground_matrix(&self) -> Matrix3<f64> {
        let row = |a: &Vector3<f64>, c: f64| {
            let v = a * self.f + self.forward * c;
            [v.x, v.y, -v.dot(&self.center)]
        };
        let r0 = row(&self.right, self.cx);
        let r1 = row(&self.down, self.cy);
        let r2 = [self.forward.x, self.forward.y, -self.forward.dot(&self.center)];
        Matrix3::new(r0[0], r0[1], r0[2], r1[0], r1[1], r1[2], r2[0], r2[1], r2[2])
    }

    /// Image-to-court homography of the floor.
    pub fn homography(&self) -> Result<Homography> {
        let g = self.ground_matrix();
        let inv = g
            .try_inverse()
            .ok_or_else(|| Error::DegenerateConfiguration("ground plane seen edge-on".into()))?;
        Homography::from_matrix(inv)
    }

    /// Pixels per meter at floor point `(x, y)`, measured along the court x axis.
    pub fn scale_at(&self, x: f64, y: f64) -> f64 {
        match (self.project([x - 0.5, y, 0.0]), self.project([x + 0.5, y, 0.0])) {
            (Some(a), Some(b)) => a.distance(&b),
            _ => 0.0,
        }
    }

    /// Exact projections of court landmarks: corners, net ends, attack lines
    /// and the margin corners.
    pub fn landmarks(&self, court: &CourtModel) -> Vec<Correspondence> {
        let (w, l, m) = (court.width_m, court.length_m, court.margin_m);
        let attack = 3.0f64.min(court.net_y / 2.0);
        let mut pts = vec![
            (0.0, 0.0),
            (w, 0.0),
            (w, l),
            (0.0, l),
            (0.0, court.net_y),
            (w, court.net_y),
            (0.0, court.net_y - attack),
            (w, court.net_y - attack),
            (0.0, court.net_y + attack),
            (w, court.net_y + attack),
        ];
        if m > 0.0 {
            pts.extend([(-m, -m), (w + m, -m), (w + m, l + m), (-m, l + m)]);
        }
        pts.into_iter()
            .filter_map(|(x, y)| {
                self.project([x, y, 0.0]).map(|p| Correspondence {
                    image: p,
                    court: CourtPoint::new(x, y),
                })
            })
            .collect()
    }
}
