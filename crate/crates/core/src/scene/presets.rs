//! Ready-made scenes used by the CLI, the benchmarks and the scenario tests.

use super::{BackgroundSpec, PartSpec, SceneConfig, Shape, TargetSpec, Trajectory, Waypoint};
use crate::imgproc::HsvColor;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

/// Scene complexity presets for throughput measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Simple,
    Complex,
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simple" => Ok(Preset::Simple),
            "complex" => Ok(Preset::Complex),
            other => Err(format!("unknown preset '{other}', expected simple or complex")),
        }
    }
}

impl Preset {
    pub fn scene(self, seed: u64) -> SceneConfig {
        match self {
            Preset::Simple => simple(seed),
            Preset::Complex => complex(seed),
        }
    }
}

/// A walking figure: head, torso and legs stacked vertically.
pub fn figure(id: u32, hue: f64, trajectory: Trajectory, rigidity: f64) -> TargetSpec {
    let color = HsvColor::new(hue, 140.0, 255.0);
    TargetSpec {
        id,
        parts: vec![
            PartSpec { shape: Shape::Ellipse, offset: [0.0, -38.0], size: [16.0, 18.0], color },
            PartSpec { shape: Shape::Rect, offset: [0.0, -8.0], size: [30.0, 40.0], color },
            PartSpec { shape: Shape::Rect, offset: [0.0, 28.0], size: [24.0, 32.0], color },
        ],
        trajectory,
        rigidity,
        texture_period: 10.0,
        texture_contrast: 0.0,
    }
}

/// Bare textured wall, no targets, no shake.
pub fn empty(seed: u64) -> SceneConfig {
    SceneConfig {
        seed,
        background: BackgroundSpec { seed: seed.wrapping_add(101), ..BackgroundSpec::default() },
        ..SceneConfig::default()
    }
}

/// Low-texture wall and a single mover.
pub fn simple(seed: u64) -> SceneConfig {
    SceneConfig {
        seed,
        background: BackgroundSpec {
            seed: seed.wrapping_add(202),
            cell_px: 20.0,
            octaves: 3,
            contrast: 0.7,
            ..BackgroundSpec::default()
        },
        targets: vec![figure(1, 20.0, Trajectory::Linear { start: [-150.0, 0.0], velocity: [4.0, 0.0] }, 1.0)],
        jitter: 2.0,
        ..SceneConfig::default()
    }
}

/// Busy wall, three movers and a static figure.
pub fn complex(seed: u64) -> SceneConfig {
    SceneConfig {
        seed,
        background: BackgroundSpec {
            seed: seed.wrapping_add(303),
            cell_px: 14.0,
            octaves: 4,
            contrast: 1.0,
            ..BackgroundSpec::default()
        },
        targets: vec![
            figure(1, 20.0, Trajectory::Linear { start: [-150.0, -90.0], velocity: [4.0, 0.0] }, 1.0),
            figure(2, 120.0, Trajectory::Linear { start: [200.0, 100.0], velocity: [-4.0, 0.0] }, 1.0),
            figure(3, 85.0, Trajectory::Linear { start: [0.0, 120.0], velocity: [0.0, -3.0] }, 1.0),
            figure(4, 40.0, Trajectory::Static { at: [-240.0, 110.0] }, 0.0),
        ],
        jitter: 3.0,
        ..SceneConfig::default()
    }
}

/// Two figures walking toward each other along separate rows while a third
/// sits still, viewed by a shaking camera.
pub fn staged_detection(seed: u64) -> SceneConfig {
    SceneConfig {
        seed,
        background: BackgroundSpec { seed: seed.wrapping_add(404), ..BackgroundSpec::default() },
        targets: vec![
            figure(1, 20.0, Trajectory::Linear { start: [-230.0, -100.0], velocity: [4.0, 0.0] }, 1.5),
            figure(2, 120.0, Trajectory::Linear { start: [230.0, 100.0], velocity: [-4.0, 0.0] }, 1.5),
            figure(3, 40.0, Trajectory::Static { at: [0.0, 10.0] }, 0.0),
        ],
        jitter: 3.0,
        ..SceneConfig::default()
    }
}

/// One target made of two same-colored blocks separated by a narrow gap,
/// each block wobbling on its own.
pub fn two_part_target(seed: u64) -> SceneConfig {
    let color = HsvColor::new(40.0, 140.0, 255.0);
    SceneConfig {
        seed,
        background: BackgroundSpec { seed: seed.wrapping_add(505), ..BackgroundSpec::default() },
        targets: vec![TargetSpec {
            id: 1,
            parts: vec![
                PartSpec { shape: Shape::Rect, offset: [0.0, -10.0], size: [26.0, 14.0], color },
                PartSpec { shape: Shape::Rect, offset: [0.0, 10.0], size: [26.0, 14.0], color },
            ],
            trajectory: Trajectory::Linear { start: [-120.0, 0.0], velocity: [5.0, 0.0] },
            rigidity: 1.5,
            texture_period: 10.0,
            texture_contrast: 0.0,
        }],
        jitter: 2.0,
        ..SceneConfig::default()
    }
}

/// A figure standing 200 px right of centre that drifts slowly further right
/// from `move_at`, turns back at `reverse_at`, walks left at 3 px per frame
/// and stops at `stop_at`. Arguments are frame indices in increasing order.
pub fn pursuit(seed: u64, move_at: u64, reverse_at: u64, stop_at: u64) -> SceneConfig {
    let (a, r, s) = (move_at as f64, reverse_at as f64, stop_at as f64);
    let far = 200.0 + 0.15 * (r - a);
    let back = far - 3.0 * (s - r);
    SceneConfig {
        seed,
        background: BackgroundSpec { seed: seed.wrapping_add(606), ..BackgroundSpec::default() },
        targets: vec![figure(
            1,
            20.0,
            Trajectory::Waypoints {
                points: vec![
                    Waypoint { frame: 0.0, at: [200.0, 0.0] },
                    Waypoint { frame: a, at: [200.0, 0.0] },
                    Waypoint { frame: r, at: [far, 0.0] },
                    Waypoint { frame: s, at: [back, 0.0] },
                ],
            },
            0.5,
        )],
        jitter: 1.0,
        ..SceneConfig::default()
    }
}
