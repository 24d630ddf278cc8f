//! Pixel offset to rotation law with a symmetric deadband.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Full-scale turn issued by one command.
pub const MAX_TURN: f64 = PI / 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerParams {
    /// Deadband half-width in pixels.
    pub th: f64,
    /// Body yaw gain, rad/px.
    pub k_yaw: f64,
    /// Gimbal pitch gain, rad/px.
    pub k_pitch: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self { th: 80.0, k_yaw: 2.18e-3, k_pitch: MAX_TURN / (240.0 - 80.0) }
    }
}

impl ControllerParams {
    /// Yaw gain computed from the full-scale rule `(pi/12) / (320 - th)`.
    /// Half of the default printed constant.
    pub fn formula_gains(th: f64) -> Self {
        Self { th, k_yaw: MAX_TURN / (320.0 - th), k_pitch: MAX_TURN / (240.0 - th) }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.th >= 0.0 && self.th.is_finite()) {
            return Err(format!("th must be finite and >= 0, got {}", self.th));
        }
        for (name, k) in [("k_yaw", self.k_yaw), ("k_pitch", self.k_pitch)] {
            if !(k > 0.0 && k.is_finite()) {
                return Err(format!("{name} must be positive, got {k}"));
            }
        }
        Ok(())
    }
}

fn deadband(d: f64, th: f64, k: f64) -> f64 {
    if d.abs() > th {
        d.signum() * (d.abs() - th) * k
    } else {
        0.0
    }
}

/// Body turn in radians for a horizontal offset; positive turns toward +dx.
pub fn yaw_command(dx: f64, p: &ControllerParams) -> f64 {
    deadband(dx, p.th, p.k_yaw)
}

/// Gimbal pitch change in radians for a vertical offset.
pub fn pitch_command(dy: f64, p: &ControllerParams) -> f64 {
    deadband(dy, p.th, p.k_pitch)
}
