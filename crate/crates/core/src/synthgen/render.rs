//! Rasterization of the court and the players.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Motion, Scene, SceneConfig};
use crate::activity::Activity;
use crate::geometry::{CourtPoint, Homography, ImagePoint, ImageRect};
use crate::raster::Frame;

pub const TEAM_COLORS: [[f32; 3]; 2] = [[0.80, 0.10, 0.15], [0.45, 0.15, 0.60]];

const WOOD: [f32; 3] = [0.85, 0.55, 0.30];
const FREE_ZONE: [f32; 3] = [0.30, 0.55, 0.35];
const LINE: [f32; 3] = [0.95, 0.95, 0.95];
const NET: [f32; 3] = [0.18, 0.18, 0.20];
const SKIN: [f32; 3] = [0.93, 0.76, 0.62];
const SHORTS: [f32; 3] = [0.10, 0.10, 0.18];
const SHOES: [f32; 3] = [0.97, 0.97, 0.97];
const LINE_HALF_M: f64 = 0.05;
const SUB: [f64; 2] = [-0.25, 0.25];

fn hash01(i: i64) -> f64 {
    let mut z = (i as u64).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64
}

fn shade(c: [f32; 3], k: f64) -> [f32; 3] {
    c.map(|v| (v as f64 * k).clamp(0.0, 1.0) as f32)
}

fn floor_color(cfg: &SceneConfig, q: CourtPoint) -> [f32; 3] {
    let c = &cfg.court;
    let (w, l) = (c.width_m, c.length_m);
    let near = |v: f64, t: f64| (v - t).abs() <= LINE_HALF_M;
    let inside_x = q.x >= -LINE_HALF_M && q.x <= w + LINE_HALF_M;
    let inside_y = q.y >= -LINE_HALF_M && q.y <= l + LINE_HALF_M;
    if inside_x && near(q.y, c.net_y) {
        return NET;
    }
    let attack = 3.0f64.min(c.net_y / 2.0);
    let on_line = (inside_y && (near(q.x, 0.0) || near(q.x, w)))
        || (inside_x && (near(q.y, 0.0) || near(q.y, l) || near(q.y, c.net_y - attack) || near(q.y, c.net_y + attack)));
    if on_line {
        return LINE;
    }
    if q.x >= 0.0 && q.x <= w && q.y >= 0.0 && q.y <= l {
        // planks run along y
        let plank = (q.x / 0.3).floor() as i64;
        let k = 0.96 + 0.08 * hash01(plank) + 0.03 * (q.y * 2.7 + plank as f64).sin();
        shade(WOOD, k)
    } else {
        let k = 0.97 + 0.03 * (q.x * 3.1).sin() * (q.y * 2.3).cos();
        shade(FREE_ZONE, k)
    }
}

fn quantize(f: Frame) -> Frame {
    let (w, h) = f.dims();
    Frame::from_rgb8(w, h, &f.to_rgb8()).expect("same dimensions")
}

/// Empty court, 2x2 supersampled and quantized to 8 bits.
pub(super) fn background(cfg: &SceneConfig, h: &Homography) -> Frame {
    let mut f = Frame::new(cfg.width, cfg.height);
    for y in 0..cfg.height {
        for x in 0..cfg.width {
            let mut acc = [0.0f64; 3];
            for dy in SUB {
                for dx in SUB {
                    let p = ImagePoint::new(x as f64 + 0.5 + dx, y as f64 + 0.5 + dy);
                    let c = match h.project(p) {
                        Ok(q) => floor_color(cfg, q),
                        Err(_) => [0.6, 0.6, 0.65],
                    };
                    for k in 0..3 {
                        acc[k] += c[k] as f64 / 4.0;
                    }
                }
            }
            f.set(x, y, acc.map(|v| v as f32));
        }
    }
    quantize(f)
}

#[derive(Debug, Clone)]
pub(super) struct Silhouette {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    /// (from, to, half thickness) in pixels
    limbs: Vec<([f64; 2], [f64; 2], f64)>,
    jersey: [f32; 3],
}

fn seg_dist2(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (ex, ey) = (a[0] + t * dx - p[0], a[1] + t * dy - p[1]);
    ex * ex + ey * ey
}

impl Silhouette {
    fn color_at(&self, x: f64, y: f64) -> Option<[f32; 3]> {
        if self.limbs.iter().any(|&(a, b, r)| seg_dist2([x, y], a, b) <= r * r) {
            return Some(SKIN);
        }
        let (u, v) = ((x - self.cx) / self.a, (y - self.cy) / self.b);
        if u * u + v * v > 1.0 {
            return None;
        }
        // 0 at the top of the body, 1 at the feet
        let t = (v + 1.0) / 2.0;
        Some(if t < 0.17 {
            SKIN
        } else if t < 0.62 {
            let stripe = ((t - 0.17) * 10.0).floor() as i64 % 2 == 0;
            if stripe {
                self.jersey
            } else {
                shade(self.jersey, 0.78)
            }
        } else if t < 0.8 {
            SHORTS
        } else if t < 0.95 {
            SKIN
        } else {
            SHOES
        })
    }

    /// Union of body and limb extents, clipped to the image.
    pub(super) fn bbox(&self, width: usize, height: usize) -> Option<ImageRect> {
        let mut x0 = self.cx - self.a;
        let mut x1 = self.cx + self.a;
        let mut y0 = self.cy - self.b;
        let mut y1 = self.cy + self.b;
        for &(p, q, r) in &self.limbs {
            x0 = x0.min(p[0].min(q[0]) - r);
            x1 = x1.max(p[0].max(q[0]) + r);
            y0 = y0.min(p[1].min(q[1]) - r);
            y1 = y1.max(p[1].max(q[1]) + r);
        }
        let (x0, y0) = (x0.max(0.0), y0.max(0.0));
        let (x1, y1) = (x1.min(width as f64), y1.min(height as f64));
        (x1 > x0 && y1 > y0).then(|| ImageRect::new(x0, y0, x1 - x0, y1 - y0))
    }

    fn draw(&self, f: &mut Frame) {
        let Some(r) = self.bbox(f.width(), f.height()) else {
            return;
        };
        let b = r.pixel_bounds().clip(f.width(), f.height());
        for y in b.y0 as usize..b.y1 as usize {
            for x in b.x0 as usize..b.x1 as usize {
                let mut acc = [0.0f64; 3];
                let mut hits = 0;
                for dy in SUB {
                    for dx in SUB {
                        if let Some(c) = self.color_at(x as f64 + 0.5 + dx, y as f64 + 0.5 + dy) {
                            hits += 1;
                            for k in 0..3 {
                                acc[k] += c[k] as f64;
                            }
                        }
                    }
                }
                if hits > 0 {
                    let cov = hits as f64 / 4.0;
                    let old = f.get(x, y);
                    let px = [0, 1, 2].map(|k| (acc[k] / 4.0 + (1.0 - cov) * old[k] as f64) as f32);
                    f.set(x, y, px);
                }
            }
        }
    }
}

/// Arm angles in degrees clockwise from straight up, for (left, right).
fn arm_angles(activity: Activity, motion: Motion, phase: f64, frame: usize) -> (f64, f64) {
    match (activity, motion) {
        (Activity::Service, _) => (-30.0, 180.0 - 210.0 * phase),
        (Activity::Reception, _) | (Activity::DefenseMove, Motion::Crouch) => (-160.0, 160.0),
        (Activity::Setting, _) => (-20.0, 20.0),
        (Activity::Attack, _) => {
            let swing = if phase < 0.5 {
                -20.0
            } else {
                -20.0 + 400.0 * (phase - 0.5)
            };
            (-40.0, swing)
        }
        (Activity::Block, _) => (-8.0, 8.0),
        (Activity::DefenseMove, _) => {
            let s = 40.0 * (frame as f64 * 0.9).sin();
            (-180.0 + s, 180.0 + s)
        }
        (Activity::Stand, _) => (-170.0, 170.0),
    }
}

pub(super) fn silhouette(scene: &Scene, player: usize, frame: usize) -> Option<Silhouette> {
    let cfg = &scene.config;
    let s = scene.states.get(player)?.get(frame)?;
    let feet = scene.camera.project([s.x, s.y, s.z])?;
    let scale = scene.camera.scale_at(s.x, s.y);
    // upright bodies are foreshortened by the camera tilt
    let vscale = scene.camera.project([s.x, s.y, s.z + 1.0])?.distance(&feet);
    if !(scale > 0.0) || !(vscale > 0.0) {
        return None;
    }
    let (hf, wf) = match s.motion {
        Motion::Crouch => (0.65, 1.2),
        Motion::Run => (1.0 - 0.05 * (frame as f64 * 0.9).sin().abs(), 1.0),
        _ => (1.0, 1.0),
    };
    let h = cfg.player_height_m * hf * vscale;
    let w = cfg.player_width_m * wf * scale;
    let shoulder_y = feet.y - 0.8 * h;
    let arm = 0.35 * cfg.player_height_m * vscale;
    let r = (0.04 * scale).max(0.6);
    let (la, ra) = arm_angles(s.activity, s.motion, s.phase, frame);
    let limb = |x: f64, deg: f64| {
        let t = deg.to_radians();
        ([x, shoulder_y], [x + arm * t.sin(), shoulder_y - arm * t.cos()], r)
    };
    Some(Silhouette {
        cx: feet.x,
        cy: feet.y - h / 2.0,
        a: w / 2.0,
        b: h / 2.0,
        limbs: vec![limb(feet.x - 0.3 * w, la), limb(feet.x + 0.3 * w, ra)],
        jersey: TEAM_COLORS[cfg.team_of(player).min(1)],
    })
}

pub(super) fn frame(scene: &Scene, index: usize) -> Frame {
    let cfg = &scene.config;
    let mut f = scene.background().clone();
    let mut drawn: Vec<(f64, Silhouette)> = (0..scene.player_count())
        .filter_map(|p| silhouette(scene, p, index).map(|s| (s.cy + s.b - scene.states[p][index].z, s)))
        .collect();
    // far players first
    drawn.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (_, s) in &drawn {
        s.draw(&mut f);
    }
    if cfg.noise_sigma > 0.0 {
        let seed = cfg.seed ^ (index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, cfg.noise_sigma).expect("sigma validated");
        let (w, h) = f.dims();
        for y in 0..h {
            for x in 0..w {
                let p = f.get(x, y);
                let q = p.map(|v| v + n.sample(&mut rng) as f32);
                f.set(x, y, q);
            }
        }
    }
    quantize(f)
}
