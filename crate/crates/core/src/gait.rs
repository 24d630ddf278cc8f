//! Tripod gait at duty factor 0.5, simulated at the phase/pose level.
//!
//! Legs are split into an R group `{R1, R2, R3}` and an L group
//! `{L1, L2, L3}`. One cycle is six steps:
//!
//! | step | action      | airborne | body |
//! |------|-------------|----------|------|
//! | 0    | R lift      | R        |      |
//! | 1    | L push      | R        | +stride/2 |
//! | 2    | R drop      | R        |      |
//! | 3    | L lift      | L        |      |
//! | 4    | R push      | L        | +stride/2 |
//! | 5    | L drop      | L        |      |
//!
//! A leg counts as airborne from the start of its lift until its drop step
//! ends, so every leg supports the body for exactly three of six steps and
//! exactly three legs are on the ground at every step.
//!
//! Turning happens in place, only once straight walking has finished its
//! cycle. A turn cycle uses the same step sequence and rotates the body by at
//! most `max_turn_per_cycle`, spread evenly over the six steps.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

pub const STEPS_PER_CYCLE: u8 = 6;
pub const JOINT_COUNT: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum GaitError {
    #[error("operation requires {expected:?} mode, gait is {actual:?}")]
    Mode { expected: GaitMode, actual: GaitMode },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Leg {
    R1,
    R2,
    R3,
    L1,
    L2,
    L3,
}

impl Leg {
    pub const ALL: [Leg; 6] = [Leg::R1, Leg::R2, Leg::R3, Leg::L1, Leg::L2, Leg::L3];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_right(self) -> bool {
        matches!(self, Leg::R1 | Leg::R2 | Leg::R3)
    }
}

/// Set of legs as a 6-bit mask, bit `i` = `Leg::ALL[i]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct LegSet(u8);

impl LegSet {
    pub const EMPTY: LegSet = LegSet(0);
    pub const R_GROUP: LegSet = LegSet(0b000_111);
    pub const L_GROUP: LegSet = LegSet(0b111_000);
    pub const ALL: LegSet = LegSet(0b111_111);

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, leg: Leg) -> bool {
        self.0 & (1 << leg.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Leg> {
        Leg::ALL.into_iter().filter(move |&l| self.contains(l))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GaitMode {
    Idle,
    Straight,
    Turning,
}

/// Planar body pose. Heading is kept in `(-pi, pi]`; positive heading turns
/// toward the robot's right.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyPose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl BodyPose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading: normalize_angle(heading) }
    }
}

/// Wrap an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitParams {
    /// Body advance per straight cycle, world units.
    pub stride: f64,
    /// Largest body rotation one turn cycle may perform, radians.
    pub max_turn_per_cycle: f64,
}

impl Default for GaitParams {
    fn default() -> Self {
        Self { stride: 0.05, max_turn_per_cycle: PI / 12.0 }
    }
}

/// Servo targets: 18 leg joints (coxa, femur, tibia per leg in `Leg::ALL`
/// order) followed by gimbal pan and tilt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointCommand(pub [f64; JOINT_COUNT]);

impl JointCommand {
    pub const GIMBAL_PAN: usize = 18;
    pub const GIMBAL_TILT: usize = 19;

    pub fn angles(&self) -> &[f64; JOINT_COUNT] {
        &self.0
    }

    pub fn with_gimbal(mut self, pan: f64, tilt: f64) -> Self {
        self.0[Self::GIMBAL_PAN] = pan.clamp(-FRAC_PI_2, FRAC_PI_2);
        self.0[Self::GIMBAL_TILT] = tilt.clamp(-FRAC_PI_2, FRAC_PI_2);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Posture {
    Support,
    Push,
    Lift,
    Swing,
    Drop,
}

// (coxa, femur, tibia) for each posture; coxa sign flips with swing direction.
fn posture_angles(p: Posture, swing_dir: f64) -> [f64; 3] {
    match p {
        Posture::Support => [0.0, 0.0, -0.6],
        Posture::Push => [-0.3 * swing_dir, 0.0, -0.6],
        Posture::Lift => [-0.3 * swing_dir, 0.5, -0.9],
        Posture::Swing => [0.3 * swing_dir, 0.5, -0.9],
        Posture::Drop => [0.3 * swing_dir, 0.0, -0.6],
    }
}

fn airborne_group(step: u8) -> LegSet {
    if step < 3 {
        LegSet::R_GROUP
    } else {
        LegSet::L_GROUP
    }
}

/// Support set while executing `step`.
pub fn stance_for_step(step: u8) -> LegSet {
    LegSet(LegSet::ALL.0 & !airborne_group(step % STEPS_PER_CYCLE).0)
}

fn joint_command(step: u8, turning: Option<f64>) -> JointCommand {
    let mut angles = [0.0; JOINT_COUNT];
    let airborne = airborne_group(step);
    let local = step % 3;
    for leg in Leg::ALL {
        // when turning, right and left legs sweep in opposite directions
        let dir = match turning {
            Some(t) if !leg.is_right() => -t.signum(),
            Some(t) => t.signum(),
            None => 1.0,
        };
        let posture = if airborne.contains(leg) {
            [Posture::Lift, Posture::Swing, Posture::Drop][local as usize]
        } else if local == 1 {
            Posture::Push
        } else {
            Posture::Support
        };
        let a = posture_angles(posture, dir);
        angles[leg.index() * 3..leg.index() * 3 + 3].copy_from_slice(&a);
    }
    JointCommand(angles)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitState {
    /// Next step to execute, `0..6`.
    pub phase: u8,
    pub mode: GaitMode,
    /// Support set of the most recently executed step.
    pub stance: LegSet,
    /// Rotation still to perform, radians. Latest command wins.
    pub pending_turn: f64,
    /// Straight cycles left to walk, counting the one in progress.
    pub straight_cycles: u32,
    turn_in_cycle: f64,
    cycle_start_heading: f64,
}

impl Default for GaitState {
    fn default() -> Self {
        Self::idle()
    }
}

impl GaitState {
    pub fn idle() -> Self {
        Self {
            phase: 0,
            mode: GaitMode::Idle,
            stance: LegSet::ALL,
            pending_turn: 0.0,
            straight_cycles: 0,
            turn_in_cycle: 0.0,
            cycle_start_heading: 0.0,
        }
    }

    /// True between cycles, where mode changes take effect.
    pub fn at_cycle_boundary(&self) -> bool {
        self.phase == 0
    }

    /// Walk straight for `cycles` full cycles (added to any in progress).
    /// Ignored while turning; the walk is not queued behind the turn.
    pub fn walk(&self, cycles: u32) -> GaitState {
        let mut s = *self;
        match s.mode {
            GaitMode::Idle if cycles > 0 => {
                s.mode = GaitMode::Straight;
                s.straight_cycles = cycles;
            }
            GaitMode::Straight => s.straight_cycles = s.straight_cycles.saturating_add(cycles),
            _ => {}
        }
        s
    }

    /// Finish the current cycle, then stand still. Drops any pending turn.
    pub fn stop(&self) -> GaitState {
        let mut s = *self;
        s.pending_turn = 0.0;
        s.straight_cycles = s.straight_cycles.min(1);
        if s.mode != GaitMode::Idle && s.phase == 0 {
            s.mode = GaitMode::Idle;
            s.straight_cycles = 0;
        }
        s
    }

    /// Request an in-place rotation by `dtheta`. A straight cycle in progress
    /// completes first. A nonzero request replaces any pending one.
    pub fn begin_turn(&self, dtheta: f64) -> GaitState {
        if dtheta == 0.0 || !dtheta.is_finite() {
            return *self;
        }
        let mut s = *self;
        s.pending_turn = dtheta;
        match s.mode {
            GaitMode::Idle => s.mode = GaitMode::Turning,
            GaitMode::Straight => {
                // walking halts at the end of this cycle, then the turn runs
                s.straight_cycles = s.straight_cycles.min(1);
                if s.phase == 0 {
                    s.mode = GaitMode::Turning;
                    s.straight_cycles = 0;
                }
            }
            GaitMode::Turning => {}
        }
        s
    }

    /// Execute one straight-walking step.
    pub fn advance_phase(&self, pose: &BodyPose, stride: f64) -> Result<(GaitState, BodyPose, JointCommand), GaitError> {
        if self.mode != GaitMode::Straight {
            return Err(GaitError::Mode { expected: GaitMode::Straight, actual: self.mode });
        }
        let step = self.phase;
        let mut s = *self;
        let mut p = *pose;
        s.stance = stance_for_step(step);
        if step == 1 || step == 4 {
            let half = stride / 2.0;
            p.x += half * pose.heading.cos();
            p.y += half * pose.heading.sin();
        }
        s.phase = (step + 1) % STEPS_PER_CYCLE;
        if s.phase == 0 {
            s.straight_cycles = s.straight_cycles.saturating_sub(1);
            s.mode = if s.pending_turn != 0.0 {
                s.straight_cycles = 0;
                GaitMode::Turning
            } else if s.straight_cycles > 0 {
                GaitMode::Straight
            } else {
                GaitMode::Idle
            };
        }
        Ok((s, p, joint_command(step, None)))
    }

    /// Execute one step of an in-place turn cycle.
    pub fn advance_turn(&self, pose: &BodyPose, params: &GaitParams) -> Result<(GaitState, BodyPose, JointCommand), GaitError> {
        if self.mode != GaitMode::Turning {
            return Err(GaitError::Mode { expected: GaitMode::Turning, actual: self.mode });
        }
        let step = self.phase;
        let mut s = *self;
        let mut p = *pose;
        if step == 0 {
            let max = params.max_turn_per_cycle.abs();
            s.turn_in_cycle = s.pending_turn.clamp(-max, max);
            s.pending_turn -= s.turn_in_cycle;
            s.cycle_start_heading = pose.heading;
        }
        s.stance = stance_for_step(step);
        let done = step + 1 == STEPS_PER_CYCLE;
        let turned = if done {
            s.turn_in_cycle
        } else {
            s.turn_in_cycle * f64::from(step + 1) / f64::from(STEPS_PER_CYCLE)
        };
        p.heading = normalize_angle(s.cycle_start_heading + turned);
        s.phase = (step + 1) % STEPS_PER_CYCLE;
        let sweep = s.turn_in_cycle;
        if done {
            s.turn_in_cycle = 0.0;
            if s.pending_turn == 0.0 {
                s.mode = if s.straight_cycles > 0 { GaitMode::Straight } else { GaitMode::Idle };
            }
        }
        Ok((s, p, joint_command(step, Some(sweep))))
    }

    /// Execute one step in whatever mode the gait is in. Idle stands still.
    pub fn step(&self, pose: &BodyPose, params: &GaitParams) -> (GaitState, BodyPose, JointCommand) {
        let result = match self.mode {
            GaitMode::Idle => {
                let mut s = *self;
                s.stance = LegSet::ALL;
                return (s, *pose, JointCommand([0.0; JOINT_COUNT]).stand());
            }
            GaitMode::Straight => self.advance_phase(pose, params.stride),
            GaitMode::Turning => self.advance_turn(pose, params),
        };
        result.expect("mode checked above")
    }
}

impl JointCommand {
    fn stand(mut self) -> Self {
        for leg in Leg::ALL {
            let a = posture_angles(Posture::Support, 1.0);
            self.0[leg.index() * 3..leg.index() * 3 + 3].copy_from_slice(&a);
        }
        self
    }
}

/// Column header of the pose trace CSV.
pub const POSE_TRACE_HEADER: &str = "cycle,phase,x,y,theta,stance";

/// One pose trace row: cycle, phase just executed, pose and stance bitmask.
pub fn pose_trace_row(cycle: u64, phase: u8, pose: &BodyPose, stance: LegSet) -> String {
    format!("{cycle},{phase},{:.6},{:.6},{:.6},{}", pose.x, pose.y, pose.heading, stance.bits())
}
