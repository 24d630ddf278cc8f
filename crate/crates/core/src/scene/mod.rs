//! Synthetic egocentric camera: a textured wall seen through a yaw/pitch
//! pinhole camera riding on the robot body, with moving multi-part targets
//! painted on the wall and per-frame camera shake.
//!
//! Positions on the wall are given in *wall pixels*: `(0, 0)` is the point the
//! camera centre sees from the home pose, and one wall pixel spans one image
//! pixel when viewed from the home pose. Increasing `u` is to the right,
//! increasing `v` is downward.

pub mod presets;

use crate::gait::BodyPose;
use crate::geometry::{BoundingBox, Point};
use crate::imgproc::{Frame, HsvColor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("sequence needs at least one pose")]
    EmptySequence,
    #[error("unknown target id {0}")]
    UnknownTarget(u32),
    #[error("invalid scene config: {0}")]
    Invalid(String),
    #[error("scene config json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Image(#[from] crate::imgproc::ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraSpec {
    pub width: u32,
    pub height: u32,
    pub focal_px: f64,
    /// Perpendicular distance from the world origin to the wall, world units.
    pub wall_distance: f64,
}

impl Default for CameraSpec {
    fn default() -> Self {
        // roughly a 60 degree horizontal field of view
        Self { width: 640, height: 480, focal_px: 554.0, wall_distance: 10.0 }
    }
}

impl CameraSpec {
    pub fn center(&self) -> Point {
        Point::new(f64::from(self.width) / 2.0, f64::from(self.height) / 2.0)
    }
}

/// Seeded multi-octave value noise mapped onto a two-color ramp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackgroundSpec {
    pub seed: u64,
    /// Lattice spacing of the coarsest octave, wall pixels.
    pub cell_px: f64,
    pub octaves: u32,
    /// Amplitude ratio between successive octaves.
    pub persistence: f64,
    /// 0 gives a flat wall, 1 uses the full ramp.
    pub contrast: f64,
    pub dark: [u8; 3],
    pub light: [u8; 3],
}

impl Default for BackgroundSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            cell_px: 24.0,
            octaves: 3,
            persistence: 0.5,
            contrast: 0.8,
            dark: [70, 62, 58],
            light: [200, 190, 170],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Rect,
    Ellipse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartSpec {
    pub shape: Shape,
    /// Part centre relative to the target position, wall pixels.
    pub offset: [f64; 2],
    pub size: [f64; 2],
    pub color: HsvColor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub frame: f64,
    pub at: [f64; 2],
}

/// Target position on the wall as a function of frame index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trajectory {
    Static { at: [f64; 2] },
    Linear { start: [f64; 2], velocity: [f64; 2] },
    /// Piecewise-linear through the waypoints, held constant outside them.
    Waypoints { points: Vec<Waypoint> },
}

impl Trajectory {
    pub fn position(&self, n: u64) -> [f64; 2] {
        let t = n as f64;
        match self {
            Trajectory::Static { at } => *at,
            Trajectory::Linear { start, velocity } => [start[0] + velocity[0] * t, start[1] + velocity[1] * t],
            Trajectory::Waypoints { points } => {
                let Some(first) = points.first() else { return [0.0, 0.0] };
                if t <= first.frame {
                    return first.at;
                }
                for w in points.windows(2) {
                    let (a, b) = (&w[0], &w[1]);
                    if t <= b.frame {
                        let span = b.frame - a.frame;
                        let f = if span > 0.0 { (t - a.frame) / span } else { 1.0 };
                        return [a.at[0] + (b.at[0] - a.at[0]) * f, a.at[1] + (b.at[1] - a.at[1]) * f];
                    }
                }
                points.last().map(|w| w.at).unwrap_or(first.at)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub id: u32,
    pub parts: Vec<PartSpec>,
    pub trajectory: Trajectory,
    /// Amplitude of each part's independent wobble, wall pixels.
    #[serde(default)]
    pub rigidity: f64,
    /// Period of the checker texture painted on each part, wall pixels.
    #[serde(default = "default_texture_period")]
    pub texture_period: f64,
    /// Relative darkening of the checker's dark cells, `0..1`.
    #[serde(default = "default_texture_contrast")]
    pub texture_contrast: f64,
}

fn default_texture_period() -> f64 {
    10.0
}

fn default_texture_contrast() -> f64 {
    0.45
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub seed: u64,
    pub camera: CameraSpec,
    pub background: BackgroundSpec,
    pub targets: Vec<TargetSpec>,
    /// Camera shake: each frame's image offset is drawn uniformly from a disc
    /// of radius `jitter / 2` pixels, so consecutive frames differ by at most
    /// `jitter` pixels.
    pub jitter: f64,
    /// Optional roll shake, radians, drawn uniformly from `±rotation_jitter / 2`.
    pub rotation_jitter: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            camera: CameraSpec::default(),
            background: BackgroundSpec::default(),
            targets: Vec::new(),
            jitter: 0.0,
            rotation_jitter: 0.0,
        }
    }
}

impl SceneConfig {
    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let cfg: SceneConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SceneError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene config serializes")
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let c = &self.camera;
        if c.width == 0 || c.height == 0 || !(c.focal_px > 0.0) || !(c.wall_distance > 0.0) {
            return Err(SceneError::Invalid("camera needs positive size, focal length and wall distance".into()));
        }
        if !(self.jitter >= 0.0) || !(self.rotation_jitter >= 0.0) {
            return Err(SceneError::Invalid("jitter amplitudes must be >= 0".into()));
        }
        if !(self.background.cell_px > 0.0) {
            return Err(SceneError::Invalid("background cell size must be > 0".into()));
        }
        for t in &self.targets {
            if t.parts.is_empty() {
                return Err(SceneError::Invalid(format!("target {} has no parts", t.id)));
            }
            if !(t.rigidity >= 0.0) {
                return Err(SceneError::Invalid(format!("target {} has negative rigidity", t.id)));
            }
        }
        Ok(())
    }

    pub fn target(&self, id: u32) -> Result<&TargetSpec, SceneError> {
        self.targets.iter().find(|t| t.id == id).ok_or(SceneError::UnknownTarget(id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetTruth {
    pub id: u32,
    /// Image-space box, clipped to the frame. `None` when not visible.
    pub bbox: Option<BoundingBox>,
}

impl TargetTruth {
    pub fn visible(&self) -> bool {
        self.bbox.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthEntry {
    pub frame: u64,
    pub pose: BodyPose,
    pub pitch: f64,
    /// Image-space shake offset applied to this frame.
    pub shake: [f64; 2],
    pub targets: Vec<TargetTruth>,
}

impl TruthEntry {
    pub fn target(&self, id: u32) -> Option<&TargetTruth> {
        self.targets.iter().find(|t| t.id == id)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub frames: Vec<TruthEntry>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `frame,target_id,x,y,w,h` for every visible target.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame,target_id,x,y,w,h\n");
        for e in &self.frames {
            for t in &e.targets {
                if let Some(b) = t.bbox {
                    let _ = writeln!(out, "{},{},{:.2},{:.2},{:.2},{:.2}", e.frame, t.id, b.x, b.y, b.w, b.h);
                }
            }
        }
        out
    }
}

fn hash64(mut x: u64) -> u64 {
    // splitmix64 finalizer
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn lattice(seed: u64, ix: i64, iy: i64) -> f64 {
    let h = hash64(seed ^ hash64((ix as u64).wrapping_mul(0x1656_67B1) ^ (iy as u64).wrapping_mul(0x27D4_EB2F_1656_67C5)));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn value_noise(seed: u64, x: f64, y: f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let sx = fx * fx * (3.0 - 2.0 * fx);
    let sy = fy * fy * (3.0 - 2.0 * fy);
    let (ix, iy) = (x0 as i64, y0 as i64);
    let a = lattice(seed, ix, iy);
    let b = lattice(seed, ix + 1, iy);
    let c = lattice(seed, ix, iy + 1);
    let d = lattice(seed, ix + 1, iy + 1);
    let top = a + (b - a) * sx;
    let bottom = c + (d - c) * sx;
    top + (bottom - top) * sy
}

impl BackgroundSpec {
    /// Texture intensity in `[0, 1]` at a wall position.
    pub fn intensity(&self, u: f64, v: f64) -> f64 {
        let mut amp = 1.0;
        let mut total = 0.0;
        let mut norm = 0.0;
        let mut cell = self.cell_px;
        for o in 0..self.octaves.max(1) {
            total += amp * value_noise(self.seed.wrapping_add(u64::from(o) * 7919), u / cell, v / cell);
            norm += amp;
            amp *= self.persistence;
            cell /= 2.0;
        }
        let n = total / norm;
        (0.5 + (n - 0.5) * self.contrast * 2.0).clamp(0.0, 1.0)
    }

    pub fn color(&self, u: f64, v: f64) -> [u8; 3] {
        let t = self.intensity(u, v);
        let mut rgb = [0u8; 3];
        for c in 0..3 {
            let (a, b) = (f64::from(self.dark[c]), f64::from(self.light[c]));
            rgb[c] = (a + (b - a) * t).round() as u8;
        }
        rgb
    }
}

const VOID: [u8; 3] = [16, 16, 16];

/// Per-frame camera model: pose, gimbal pitch and shake.
#[derive(Debug, Clone, Copy)]
struct View {
    cam: CameraSpec,
    pos: [f64; 2],
    fwd: [f64; 3],
    right: [f64; 3],
    down: [f64; 3],
    shake: [f64; 2],
    roll_cos: f64,
    roll_sin: f64,
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl View {
    fn new(cfg: &SceneConfig, pose: &BodyPose, pitch: f64, n: u64) -> Self {
        let (sh, ch) = pose.heading.sin_cos();
        let (sp, cp) = pitch.sin_cos();
        let fwd0 = [ch, sh, 0.0];
        let right = [-sh, ch, 0.0];
        let up = [0.0, 0.0, 1.0];
        let fwd = [cp * fwd0[0] + sp * up[0], cp * fwd0[1] + sp * up[1], cp * fwd0[2] + sp * up[2]];
        let up2 = [-sp * fwd0[0] + cp * up[0], -sp * fwd0[1] + cp * up[1], -sp * fwd0[2] + cp * up[2]];
        let down = [-up2[0], -up2[1], -up2[2]];
        let (shake, roll) = shake_for(cfg, n);
        Self {
            cam: cfg.camera,
            pos: [pose.x, pose.y],
            fwd,
            right,
            down,
            shake,
            roll_cos: roll.cos(),
            roll_sin: roll.sin(),
        }
    }

    /// Wall position seen at image pixel `(x, y)`, or `None` if the ray misses.
    fn pixel_to_wall(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let c = self.cam.center();
        let (a0, b0) = (x - c.x - self.shake[0], y - c.y - self.shake[1]);
        let a = self.roll_cos * a0 + self.roll_sin * b0;
        let b = -self.roll_sin * a0 + self.roll_cos * b0;
        let (rx, ry) = (a / self.cam.focal_px, b / self.cam.focal_px);
        let dir = [
            self.fwd[0] + rx * self.right[0] + ry * self.down[0],
            self.fwd[1] + rx * self.right[1] + ry * self.down[1],
            self.fwd[2] + rx * self.right[2] + ry * self.down[2],
        ];
        let d = self.cam.wall_distance;
        if dir[0] <= 1e-9 {
            return None;
        }
        let t = (d - self.pos[0]) / dir[0];
        if t <= 0.0 {
            return None;
        }
        let wy = self.pos[1] + t * dir[1];
        let wz = t * dir[2];
        let scale = self.cam.focal_px / d;
        Some((wy * scale, -wz * scale))
    }

    /// Image position of a wall point, or `None` if it is behind the camera.
    fn wall_to_pixel(&self, u: f64, v: f64) -> Option<Point> {
        let d = self.cam.wall_distance;
        let scale = d / self.cam.focal_px;
        let p = [d - self.pos[0], u * scale - self.pos[1], -v * scale];
        let zf = dot(p, self.fwd);
        if zf <= 1e-9 {
            return None;
        }
        let a = self.cam.focal_px * dot(p, self.right) / zf;
        let b = self.cam.focal_px * dot(p, self.down) / zf;
        let a0 = self.roll_cos * a - self.roll_sin * b;
        let b0 = self.roll_sin * a + self.roll_cos * b;
        let c = self.cam.center();
        Some(Point::new(a0 + c.x + self.shake[0], b0 + c.y + self.shake[1]))
    }
}

fn frame_rng(cfg: &SceneConfig, n: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(hash64(cfg.seed ^ hash64(n.wrapping_mul(31).wrapping_add(salt))))
}

fn shake_for(cfg: &SceneConfig, n: u64) -> ([f64; 2], f64) {
    let mut rng = frame_rng(cfg, n, 1);
    let radius = cfg.jitter / 2.0;
    let shake = if radius > 0.0 {
        // uniform over the disc
        let r = radius * rng.gen::<f64>().sqrt();
        let a = rng.gen::<f64>() * std::f64::consts::TAU;
        [r * a.cos(), r * a.sin()]
    } else {
        [0.0, 0.0]
    };
    let roll = if cfg.rotation_jitter > 0.0 {
        (rng.gen::<f64>() - 0.5) * cfg.rotation_jitter
    } else {
        0.0
    };
    (shake, roll)
}

/// Wall-space geometry of one target part at frame `n`.
#[derive(Debug, Clone, Copy)]
struct PlacedPart {
    center: [f64; 2],
    half: [f64; 2],
    shape: Shape,
    color: HsvColor,
}

fn wobble(cfg: &SceneConfig, target: &TargetSpec, part: usize, n: u64) -> [f64; 2] {
    if target.rigidity <= 0.0 {
        return [0.0, 0.0];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hash64(cfg.seed ^ hash64(u64::from(target.id) << 16 | part as u64)));
    let phase_x: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
    let phase_y: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
    let t = n as f64;
    [target.rigidity * (0.35 * t + phase_x).sin(), target.rigidity * (0.23 * t + phase_y).sin()]
}

fn place_parts(cfg: &SceneConfig, target: &TargetSpec, n: u64) -> Vec<PlacedPart> {
    let base = target.trajectory.position(n);
    target
        .parts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let w = wobble(cfg, target, i, n);
            PlacedPart {
                center: [base[0] + p.offset[0] + w[0], base[1] + p.offset[1] + w[1]],
                half: [p.size[0] / 2.0, p.size[1] / 2.0],
                shape: p.shape,
                color: p.color,
            }
        })
        .collect()
}

impl PlacedPart {
    fn contains(&self, u: f64, v: f64) -> bool {
        let dx = (u - self.center[0]) / self.half[0];
        let dy = (v - self.center[1]) / self.half[1];
        match self.shape {
            Shape::Rect => dx.abs() <= 1.0 && dy.abs() <= 1.0,
            Shape::Ellipse => dx * dx + dy * dy <= 1.0,
        }
    }

    fn image_box(&self, view: &View) -> Option<BoundingBox> {
        let corners = [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)].map(|(sx, sy)| {
            view.wall_to_pixel(self.center[0] + sx * self.half[0], self.center[1] + sy * self.half[1])
        });
        if corners.iter().any(Option::is_none) {
            return None;
        }
        BoundingBox::enclosing(corners.into_iter().flatten())
    }
}

fn shade(part: &PlacedPart, target: &TargetSpec, u: f64, v: f64) -> [u8; 3] {
    let period = target.texture_period;
    let mut c = part.color;
    if period > 0.0 {
        // checker in part-local coordinates, so the pattern moves with the part
        let lu = ((u - part.center[0]) / (period / 2.0)).floor() as i64;
        let lv = ((v - part.center[1]) / (period / 2.0)).floor() as i64;
        if (lu + lv).rem_euclid(2) == 1 {
            c.v *= 1.0 - target.texture_contrast;
        }
    }
    c.to_rgb()
}

/// Render frame `n` seen from `pose` with gimbal `pitch` (radians, up positive).
pub fn render_frame(cfg: &SceneConfig, pose: &BodyPose, pitch: f64, n: u64) -> (Frame, TruthEntry) {
    let view = View::new(cfg, pose, pitch, n);
    let (w, h) = (cfg.camera.width, cfg.camera.height);
    let mut wall = Vec::with_capacity(w as usize * h as usize);
    let mut pixels = Vec::with_capacity(w as usize * h as usize);
    for y in 0..h {
        for x in 0..w {
            let hit = view.pixel_to_wall(f64::from(x), f64::from(y));
            pixels.push(match hit {
                Some((u, v)) => cfg.background.color(u, v),
                None => VOID,
            });
            wall.push(hit);
        }
    }

    let mut truths = Vec::with_capacity(cfg.targets.len());
    for target in &cfg.targets {
        let parts = place_parts(cfg, target, n);
        let mut boxes = Vec::new();
        for part in &parts {
            let Some(b) = part.image_box(&view) else { continue };
            boxes.push(b);
            let Some(clip) = b.clipped(f64::from(w), f64::from(h)) else { continue };
            let (x0, y0) = (clip.x.floor() as u32, clip.y.floor() as u32);
            let x1 = (clip.right().ceil() as u32).min(w);
            let y1 = (clip.bottom().ceil() as u32).min(h);
            for y in y0..y1 {
                for x in x0..x1 {
                    let i = (y * w + x) as usize;
                    if let Some((u, v)) = wall[i] {
                        if part.contains(u, v) {
                            pixels[i] = shade(part, target, u, v);
                        }
                    }
                }
            }
        }
        let bbox = BoundingBox::enclosing(boxes.iter().flat_map(|b| {
            [Point::new(b.x, b.y), Point::new(b.right(), b.bottom())]
        }))
        .and_then(|b| b.clipped(f64::from(w), f64::from(h)));
        truths.push(TargetTruth { id: target.id, bbox });
    }

    let frame = Frame::new(w, h, n, pixels).expect("rendered buffer matches camera size");
    let entry = TruthEntry { frame: n, pose: *pose, pitch, shake: view.shake, targets: truths };
    (frame, entry)
}

/// Image position of a wall point for the given pose (shake excluded).
pub fn project_wall_point(cfg: &SceneConfig, pose: &BodyPose, pitch: f64, u: f64, v: f64) -> Option<Point> {
    let mut view = View::new(cfg, pose, pitch, 0);
    view.shake = [0.0, 0.0];
    view.roll_cos = 1.0;
    view.roll_sin = 0.0;
    view.wall_to_pixel(u, v)
}

/// Render `poses.len()` frames, frame `i` from `poses[i]` with level gimbal.
/// Frames are rendered in parallel on the current rayon pool; output does not
/// depend on scheduling.
pub fn generate_sequence(cfg: &SceneConfig, poses: &[BodyPose]) -> Result<(Vec<Frame>, GroundTruth), SceneError> {
    if poses.is_empty() {
        return Err(SceneError::EmptySequence);
    }
    let rendered: Vec<(Frame, TruthEntry)> = poses
        .par_iter()
        .enumerate()
        .map(|(i, p)| render_frame(cfg, p, 0.0, i as u64))
        .collect();
    let (frames, entries) = rendered.into_iter().unzip();
    Ok((frames, GroundTruth { frames: entries }))
}

/// Write frames as `frame_00000.<ext>` plus `ground_truth.csv` into `dir`.
pub fn export_sequence(frames: &[Frame], truth: &GroundTruth, dir: impl AsRef<Path>, ext: &str) -> Result<(), SceneError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for f in frames {
        crate::imgproc::write_frame(f, dir.join(format!("frame_{:05}.{ext}", f.index())))?;
    }
    std::fs::write(dir.join("ground_truth.csv"), truth.to_csv())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_target(traj: Trajectory) -> SceneConfig {
        SceneConfig {
            targets: vec![TargetSpec {
                id: 1,
                parts: vec![PartSpec {
                    shape: Shape::Rect,
                    offset: [0.0, 0.0],
                    size: [30.0, 40.0],
                    color: HsvColor::new(0.0, 220.0, 230.0),
                }],
                trajectory: traj,
                rigidity: 0.0,
                texture_period: 10.0,
                texture_contrast: 0.45,
            }],
            ..SceneConfig::default()
        }
    }

    #[test]
    fn static_scene_is_constant() {
        let cfg = SceneConfig::default();
        let pose = BodyPose::default();
        let (a, _) = render_frame(&cfg, &pose, 0.0, 0);
        let (mut b, _) = render_frame(&cfg, &pose, 0.0, 17);
        b.set_index(0);
        assert_eq!(a, b);
    }

    #[test]
    fn home_pose_maps_wall_to_image_identically() {
        let cfg = SceneConfig::default();
        let p = project_wall_point(&cfg, &BodyPose::default(), 0.0, 25.0, -40.0).unwrap();
        assert!((p.x - 345.0).abs() < 1e-9 && (p.y - 200.0).abs() < 1e-9);
    }

    #[test]
    fn yaw_shifts_background_by_focal_tan() {
        let cfg = SceneConfig::default();
        let dtheta: f64 = 0.1;
        let p = project_wall_point(&cfg, &BodyPose::new(0.0, 0.0, dtheta), 0.0, 0.0, 0.0).unwrap();
        let expected = cfg.camera.focal_px * dtheta.tan();
        assert!(((320.0 - p.x) - expected).abs() < 1e-9);

        // and the rendered texture agrees: column c at heading 0 equals
        // column c - shift at the new heading, near the centre row
        let (f0, _) = render_frame(&cfg, &BodyPose::default(), 0.0, 0);
        let (f1, _) = render_frame(&cfg, &BodyPose::new(0.0, 0.0, dtheta), 0.0, 0);
        let shift = expected.round() as u32;
        let mut diff = 0u64;
        for x in 300..340 {
            let a = f0.get(x, 240);
            let b = f1.get(x - shift, 240);
            diff += (0..3).map(|c| u64::from(a[c].abs_diff(b[c]))).sum::<u64>();
        }
        assert!(diff / 120 < 6, "mean channel difference {}", diff / 120);
    }

    #[test]
    fn target_pixels_lie_in_truth_box() {
        let cfg = one_target(Trajectory::Static { at: [0.0, 0.0] });
        let (frame, truth) = render_frame(&cfg, &BodyPose::default(), 0.0, 0);
        let b = truth.targets[0].bbox.unwrap();
        assert!((b.center().x - 320.0).abs() < 1e-9 && (b.center().y - 240.0).abs() < 1e-9);
        let expect = HsvColor::new(0.0, 220.0, 230.0).to_rgb();
        assert_eq!(frame.get(320, 240), expect);
        assert_ne!(frame.get(320, 300), expect);
    }

    #[test]
    fn sequences_are_deterministic() {
        let mut cfg = one_target(Trajectory::Linear { start: [-50.0, 0.0], velocity: [4.0, 1.0] });
        cfg.jitter = 3.0;
        let poses = vec![BodyPose::default(); 4];
        let a = generate_sequence(&cfg, &poses).unwrap();
        let b = generate_sequence(&cfg, &poses).unwrap();
        assert_eq!(a, b);
        let one = generate_sequence(&cfg, &poses[..1]).unwrap();
        assert_eq!(one.0.len(), 1);
        assert_eq!(one.1.len(), 1);
        assert!(matches!(generate_sequence(&cfg, &[]), Err(SceneError::EmptySequence)));
    }

    #[test]
    fn lateral_translation_moves_static_target_opposite() {
        let cfg = one_target(Trajectory::Static { at: [0.0, 0.0] });
        let step = 5.0 * cfg.camera.wall_distance / cfg.camera.focal_px;
        let poses: Vec<_> = (0..4).map(|i| BodyPose::new(0.0, step * i as f64, 0.0)).collect();
        let (_, truth) = generate_sequence(&cfg, &poses).unwrap();
        for w in truth.frames.windows(2) {
            let a = w[0].targets[0].bbox.unwrap().center();
            let b = w[1].targets[0].bbox.unwrap().center();
            assert!((b.x - a.x + 5.0).abs() < 1e-9);
            assert!((b.y - a.y).abs() < 1e-9);
        }
    }

    #[test]
    fn shake_is_bounded_between_frames() {
        let cfg = SceneConfig { jitter: 4.0, ..SceneConfig::default() };
        let shakes: Vec<_> = (0..200).map(|n| shake_for(&cfg, n).0).collect();
        for w in shakes.windows(2) {
            let d = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
            assert!(d <= 4.0 + 1e-12);
        }
        assert!(shakes.iter().any(|s| s[0].hypot(s[1]) > 1.0));
    }

    #[test]
    fn invisible_target_has_no_box() {
        let cfg = one_target(Trajectory::Static { at: [2000.0, 0.0] });
        let (_, truth) = render_frame(&cfg, &BodyPose::default(), 0.0, 0);
        assert!(!truth.targets[0].visible());
    }

    #[test]
    fn config_json_roundtrip_and_validation() {
        let cfg = one_target(Trajectory::Waypoints {
            points: vec![Waypoint { frame: 0.0, at: [0.0, 0.0] }, Waypoint { frame: 10.0, at: [50.0, 0.0] }],
        });
        let back = SceneConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert!(SceneConfig::from_json(r#"{"jitter": -1.0}"#).is_err());
        assert_eq!(cfg.targets[0].trajectory.position(5), [25.0, 0.0]);
        assert_eq!(cfg.targets[0].trajectory.position(50), [50.0, 0.0]);
    }

    #[test]
    fn truth_csv_lists_visible_targets() {
        let cfg = one_target(Trajectory::Static { at: [0.0, 0.0] });
        let (_, truth) = generate_sequence(&cfg, &[BodyPose::default(); 2]).unwrap();
        let csv = truth.to_csv();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(1).unwrap().starts_with("0,1,305.00,220.00,30.00,40.00"));
    }
}
