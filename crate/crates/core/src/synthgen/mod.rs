//! Deterministic synthetic volleyball scenes: scripted rallies rendered as
//! textured ellipse players on a textured court, with annotations,
//! calibration landmarks and ground truth.

mod camera;
mod emit;
mod render;

pub use camera::{Camera, CameraConfig};
pub use emit::{
    emit_dataset, load_scene_config, Manifest, ManifestEntry, ANNOTATIONS_FILE, CALIBRATION_FILE, FRAMES_DIR,
    GROUND_TRUTH_FILE, MANIFEST_FILE, SCENE_FILE,
};
pub use render::TEAM_COLORS;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activity::Activity;
use crate::error::{Error, Result};
use crate::geometry::{CourtModel, Homography, ImagePoint, ImageRect};
use crate::pipeline::AnnotationRecord;
use crate::raster::Frame;

/// Axis-aligned uniform law in team-local court meters: x across the court,
/// y from the team's own baseline toward the net.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionLaw {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl PositionLaw {
    pub const fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        PositionLaw {
            x: [x0, x1],
            y: [y0, y1],
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        (uniform(rng, self.x), uniform(rng, self.y))
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x[0] && x <= self.x[1] && y >= self.y[0] && y <= self.y[1]
    }
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[1] > r[0] {
        rng.random_range(r[0]..r[1])
    } else {
        r[0]
    }
}

pub mod laws {
    use super::PositionLaw;

    pub const SERVICE: PositionLaw = PositionLaw::new(0.5, 8.5, -0.9, -0.3);
    pub const RECEPTION: PositionLaw = PositionLaw::new(1.0, 8.0, 1.5, 4.5);
    pub const SETTING: PositionLaw = PositionLaw::new(5.0, 6.5, 7.2, 8.0);
    pub const ATTACK: PositionLaw = PositionLaw::new(0.8, 8.2, 6.0, 7.3);
    pub const BLOCK: PositionLaw = PositionLaw::new(1.0, 8.0, 8.4, 8.9);
    /// Defensive crouch shares the reception zone.
    pub const DEFENSE_CROUCH: PositionLaw = RECEPTION;
    pub const DEFENSE_RUN: PositionLaw = PositionLaw::new(1.5, 7.5, 2.0, 4.5);
    pub const STAND: PositionLaw = PositionLaw::new(0.5, 8.5, 4.8, 5.8);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motion {
    Still,
    Crouch,
    Jump,
    /// Lateral run across the law's x range.
    Run,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptStep {
    pub player: usize,
    pub activity: Activity,
    pub start: usize,
    pub duration: usize,
    pub law: PositionLaw,
    pub motion: Motion,
    pub annotate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub seed: u64,
    pub court: CourtModel,
    pub camera: CameraConfig,
    pub width: usize,
    pub height: usize,
    /// Standard deviation of additive pixel noise, channels in [0, 1].
    pub noise_sigma: f64,
    pub players_per_team: usize,
    pub frames: usize,
    pub keyframe_spacing: usize,
    pub player_height_m: f64,
    pub player_width_m: f64,
    pub script: Vec<ScriptStep>,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            seed: 0,
            court: CourtModel::default(),
            camera: CameraConfig::default(),
            width: 480,
            height: 360,
            noise_sigma: 2.0 / 255.0,
            players_per_team: 6,
            frames: 0,
            keyframe_spacing: 5,
            player_height_m: 1.85,
            player_width_m: 0.55,
            script: Vec::new(),
        }
    }
}

pub const RALLY_FRAMES: usize = 500;

fn pick(rng: &mut ChaCha8Rng, pool: &[usize], n: usize) -> Vec<usize> {
    let mut p = pool.to_vec();
    p.shuffle(rng);
    p.truncate(n);
    p
}

impl SceneConfig {
    /// Scripted rallies with the serve alternating between teams. Each rally:
    /// service, reception, set, attack against a block, defense, then the
    /// same exchange the other way, with stand tracklets at both ends.
    pub fn benchmark(seed: u64, rallies: usize) -> Self {
        let mut cfg = SceneConfig {
            seed,
            frames: rallies * RALLY_FRAMES,
            ..SceneConfig::default()
        };
        let per = cfg.players_per_team;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5c41_7a11_0000);
        let mut script = Vec::new();
        let mut step = |player: usize, activity, start: usize, duration, law, motion| {
            script.push(ScriptStep {
                player,
                activity,
                start,
                duration,
                law,
                motion,
                annotate: true,
            });
        };
        for r in 0..rallies {
            let o = r * RALLY_FRAMES;
            let (s, rc) = (r % 2, 1 - r % 2);
            let front = |t: usize| (0..per / 2).map(|i| t * per + i).collect::<Vec<_>>();
            let back = |t: usize| (per / 2..per).map(|i| t * per + i).collect::<Vec<_>>();

            let all: Vec<usize> = (0..2 * per).collect();
            for p in pick(&mut rng, &all, 2) {
                step(p, Activity::Stand, o + 5, 40, laws::STAND, Motion::Still);
            }
            let server = pick(&mut rng, &back(s), 1)[0];
            step(server, Activity::Service, o + 60, 50, laws::SERVICE, Motion::Still);
            for p in pick(&mut rng, &back(rc), 2) {
                step(p, Activity::Reception, o + 100, 40, laws::RECEPTION, Motion::Crouch);
            }
            for (team, opp, t0) in [(rc, s, o + 145), (s, rc, o + 270)] {
                let f = pick(&mut rng, &front(team), 2);
                step(f[0], Activity::Setting, t0, 35, laws::SETTING, Motion::Still);
                step(f[1], Activity::Attack, t0 + 35, 40, laws::ATTACK, Motion::Jump);
                for p in pick(&mut rng, &front(opp), 2) {
                    step(p, Activity::Block, t0 + 45, 30, laws::BLOCK, Motion::Jump);
                }
                for p in back(opp) {
                    if rng.random::<f64>() < 0.6 {
                        step(
                            p,
                            Activity::DefenseMove,
                            t0 + 70,
                            45,
                            laws::DEFENSE_CROUCH,
                            Motion::Crouch,
                        );
                    } else {
                        step(p, Activity::DefenseMove, t0 + 70, 45, laws::DEFENSE_RUN, Motion::Run);
                    }
                }
            }
            for p in pick(&mut rng, &all, 2) {
                step(p, Activity::Stand, o + 440, 40, laws::STAND, Motion::Still);
            }
        }
        cfg.script = script;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.court.validate()?;
        if self.width == 0 || self.height == 0 {
            return Err(Error::ConfigInvalid("image size must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::ConfigInvalid("noise sigma must be >= 0".into()));
        }
        if self.keyframe_spacing == 0 {
            return Err(Error::ConfigInvalid("keyframe spacing must be >= 1".into()));
        }
        if !(self.player_height_m > 0.0 && self.player_width_m > 0.0) {
            return Err(Error::ConfigInvalid("player size must be positive".into()));
        }
        let n = 2 * self.players_per_team;
        for s in &self.script {
            if s.duration == 0 {
                return Err(Error::ConfigInvalid("script step durations must be >= 1".into()));
            }
            if s.player >= n {
                return Err(Error::ConfigInvalid(format!("script names player {} of {n}", s.player)));
            }
            if s.start + s.duration > self.frames {
                return Err(Error::ConfigInvalid("script step runs past the last frame".into()));
            }
            if s.law.x[0] > s.law.x[1] || s.law.y[0] > s.law.y[1] {
                return Err(Error::ConfigInvalid("empty position law".into()));
            }
        }
        for p in 0..n {
            let mut steps: Vec<&ScriptStep> = self.script.iter().filter(|s| s.player == p).collect();
            steps.sort_by_key(|s| s.start);
            if steps.windows(2).any(|w| w[0].start + w[0].duration > w[1].start) {
                return Err(Error::ConfigInvalid(format!("overlapping script steps for player {p}")));
            }
        }
        Ok(())
    }

    pub fn team_of(&self, player: usize) -> usize {
        player / self.players_per_team.max(1)
    }

    /// Team-local to court coordinates; the second team is mirrored.
    pub fn to_court(&self, team: usize, x: f64, y: f64) -> (f64, f64) {
        if team == 0 {
            (x, y)
        } else {
            (self.court.width_m - x, self.court.length_m - y)
        }
    }
}

/// State of one player in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlayerState {
    pub x: f64,
    pub y: f64,
    /// Height of the feet above the floor.
    pub z: f64,
    pub activity: Activity,
    pub motion: Motion,
    /// Progress through the current script step, in [0, 1].
    pub phase: f64,
    pub tracklet: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackletInfo {
    pub id: u32,
    pub player: usize,
    pub activity: Activity,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub frame: usize,
    pub player: usize,
    pub team: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub activity: Activity,
    pub tracklet: Option<u32>,
    /// Projection of the floor point under the player.
    pub feet: ImagePoint,
    pub bbox: ImageRect,
}

/// An expanded scene; frames are rendered on demand.
#[derive(Debug, Clone)]
pub struct Scene {
    pub config: SceneConfig,
    pub camera: Camera,
    pub homography: Homography,
    /// `states[player][frame]`
    pub states: Vec<Vec<PlayerState>>,
    pub tracklets: Vec<TrackletInfo>,
    background: Frame,
}

const JUMP_HEIGHT_M: f64 = 0.5;
const RETURN_FRAMES: f64 = 60.0;
/// Frames over which idle sway fades in after (and out before) a step.
const SWAY_RAMP: f64 = 8.0;

/// Rotation slot: front row near the net, back row behind the attack line.
fn formation_slot(per: usize, slot: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let front = slot < per / 2;
    let row = if front { per / 2 } else { per - per / 2 };
    let col = if front { slot } else { slot - per / 2 };
    let x = (col as f64 + 0.5) * 9.0 / row.max(1) as f64;
    let y = if front { 7.0 } else { 3.0 };
    (x + rng.random_range(-0.4..0.4), y + rng.random_range(-0.4..0.4))
}

/// Slow wandering of players who are between script steps.
#[derive(Debug, Clone, Copy)]
struct Sway {
    amp: [f64; 2],
    period: [f64; 2],
    phase: [f64; 2],
}

impl Sway {
    fn sample(rng: &mut ChaCha8Rng) -> Self {
        let tau = std::f64::consts::TAU;
        Sway {
            amp: [rng.random_range(0.25..0.45), rng.random_range(0.2..0.35)],
            period: [rng.random_range(70.0..140.0), rng.random_range(70.0..140.0)],
            phase: [rng.random_range(0.0..tau), rng.random_range(0.0..tau)],
        }
    }

    /// `gap`: frames to the nearest step boundary.
    fn offset(&self, frame: usize, gap: usize) -> (f64, f64) {
        let w = (gap as f64 / SWAY_RAMP).min(1.0);
        let tau = std::f64::consts::TAU;
        let c = |i: usize| {
            let t = tau * frame as f64 / self.period[i] + self.phase[i];
            self.amp[i] * t.sin()
        };
        (w * c(0), w * c(1))
    }
}

pub fn generate(config: &SceneConfig) -> Result<Scene> {
    config.validate()?;
    let camera = Camera::new(&config.camera, config.width, config.height)?;
    let homography = camera.homography()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let per = config.players_per_team;
    let n = 2 * per;
    let mut order: Vec<usize> = (0..config.script.len()).collect();
    order.sort_by_key(|&i| (config.script[i].start, config.script[i].player));
    let mut tracklets = Vec::new();
    let mut ids = vec![None; config.script.len()];
    for &i in &order {
        let s = &config.script[i];
        if s.annotate {
            let id = tracklets.len() as u32;
            ids[i] = Some(id);
            tracklets.push(TrackletInfo {
                id,
                player: s.player,
                activity: s.activity,
                start: s.start,
                end: s.start + s.duration,
            });
        }
    }

    let mut states = Vec::with_capacity(n);
    for p in 0..n {
        let team = p / per.max(1);
        let slot = p % per.max(1);
        let home = formation_slot(per, slot, &mut rng);
        let sway = Sway::sample(&mut rng);
        // (start, end, start_xy, end_xy, step index), team-local
        let mut segs = Vec::new();
        for &i in order.iter().filter(|&&i| config.script[i].player == p) {
            let s = &config.script[i];
            let (x, y) = s.law.sample(&mut rng);
            let (a, b) = if s.motion == Motion::Run {
                let (lo, hi) = (s.law.x[0], s.law.x[1]);
                if rng.random::<bool>() {
                    ((lo, y), (hi, y))
                } else {
                    ((hi, y), (lo, y))
                }
            } else {
                ((x, y), (x, y))
            };
            segs.push((s.start, s.start + s.duration, a, b, i));
        }
        let mut track = Vec::with_capacity(config.frames);
        let mut prev_end = 0usize;
        let mut prev_pos = home;
        let mut next = 0;
        for f in 0..config.frames {
            while next < segs.len() && f >= segs[next].1 {
                prev_end = segs[next].1;
                prev_pos = segs[next].3;
                next += 1;
            }
            let (lx, ly, st) = match segs.get(next) {
                Some(&(s0, s1, a, b, i)) if f >= s0 => {
                    let t = if s1 - s0 > 1 {
                        (f - s0) as f64 / (s1 - s0 - 1) as f64
                    } else {
                        0.0
                    };
                    (a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t, Some((i, t)))
                }
                Some(&(s0, _, a, _, _)) => {
                    // walk toward the next step's start position
                    let t = (f - prev_end) as f64 / (s0 - prev_end).max(1) as f64;
                    let (dx, dy) = sway.offset(f, (f - prev_end).min(s0 - f));
                    (
                        prev_pos.0 + (a.0 - prev_pos.0) * t + dx,
                        prev_pos.1 + (a.1 - prev_pos.1) * t + dy,
                        None,
                    )
                }
                None => {
                    // back to the home slot, then idle there
                    let t = ((f - prev_end) as f64 / RETURN_FRAMES).min(1.0);
                    let (dx, dy) = sway.offset(f, f - prev_end);
                    (
                        prev_pos.0 + (home.0 - prev_pos.0) * t + dx,
                        prev_pos.1 + (home.1 - prev_pos.1) * t + dy,
                        None,
                    )
                }
            };
            let (x, y) = config.to_court(team, lx, ly);
            let state = match st {
                Some((i, t)) => {
                    let s = &config.script[i];
                    PlayerState {
                        x,
                        y,
                        z: if s.motion == Motion::Jump {
                            4.0 * JUMP_HEIGHT_M * t * (1.0 - t)
                        } else {
                            0.0
                        },
                        activity: s.activity,
                        motion: s.motion,
                        phase: t,
                        tracklet: ids[i],
                    }
                }
                None => PlayerState {
                    x,
                    y,
                    z: 0.0,
                    activity: Activity::Stand,
                    motion: Motion::Still,
                    phase: 0.0,
                    tracklet: None,
                },
            };
            track.push(state);
        }
        states.push(track);
    }
    let background = render::background(config, &homography);
    Ok(Scene {
        config: config.clone(),
        camera,
        homography,
        states,
        tracklets,
        background,
    })
}

impl Scene {
    pub fn frame_count(&self) -> usize {
        self.config.frames
    }

    pub fn player_count(&self) -> usize {
        self.states.len()
    }

    /// The empty court, quantized like rendered frames.
    pub fn background(&self) -> &Frame {
        &self.background
    }

    pub fn render(&self, frame: usize) -> Frame {
        render::frame(self, frame)
    }

    /// Bounding box of a player's rendered silhouette, clipped to the image.
    pub fn player_bbox(&self, player: usize, frame: usize) -> Option<ImageRect> {
        render::silhouette(self, player, frame).and_then(|s| s.bbox(self.config.width, self.config.height))
    }

    pub fn ground_truth(&self, frame: usize) -> Vec<GroundTruthRecord> {
        (0..self.player_count())
            .filter_map(|p| {
                let s = self.states[p][frame];
                let feet = self.camera.project([s.x, s.y, 0.0])?;
                Some(GroundTruthRecord {
                    frame,
                    player: p,
                    team: self.config.team_of(p),
                    x: s.x,
                    y: s.y,
                    z: s.z,
                    activity: s.activity,
                    tracklet: s.tracklet,
                    feet,
                    bbox: self.player_bbox(p, frame)?,
                })
            })
            .collect()
    }

    /// Keyframe annotations: every `keyframe_spacing` frames of each
    /// tracklet plus its last frame.
    pub fn annotations(&self) -> Vec<AnnotationRecord> {
        let k = self.config.keyframe_spacing;
        let mut out = Vec::new();
        for t in &self.tracklets {
            let mut frames: Vec<usize> = (t.start..t.end).step_by(k).collect();
            if *frames.last().unwrap() != t.end - 1 {
                frames.push(t.end - 1);
            }
            for f in frames {
                if let Some(bbox) = self.player_bbox(t.player, f) {
                    out.push(AnnotationRecord {
                        frame_id: f,
                        tracklet_id: t.id,
                        class: t.activity,
                        bbox,
                    });
                }
            }
        }
        out.sort_by_key(|a| (a.frame_id, a.tracklet_id));
        out
    }
}

#[cfg(test)]
mod tests;
