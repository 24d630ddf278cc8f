//! The processor loop: one authoritative session state advanced tick by tick.

use crate::protocol::{Direction, FramePayload, ImageRef, Mode, Offset, OperatorMessage, ServerMessage, StatusPayload};
use base64::Engine;
use hexwatch::control::{pitch_command, yaw_command, ControllerParams, MAX_TURN};
use hexwatch::gait::{BodyPose, GaitParams, GaitState};
use hexwatch::imgproc::Frame;
use hexwatch::kcf::{init_track, update_track, KcfError, KcfParams, TrackResult, TrackState};
use hexwatch::pipeline::{DetectError, Detector, PipelineParams};
use hexwatch::rcp::{self, RcpCommand, MAX_OFFSET};
use hexwatch::scene::{render_frame, SceneConfig, TruthEntry};
use hexwatch::BoundingBox;
use serde::Serialize;
use std::collections::{BTreeMap, VecDeque};
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;
use thiserror::Error;

/// Names accepted by `SET_PARAMS`.
pub const PARAM_NAMES: [&str; 11] =
    ["th1", "th2", "th3", "th4", "th5", "th6", "th", "k_yaw", "k_pitch", "diff_threshold", "min_area"];

/// Gimbal travel limit, radians either side of level.
pub const PITCH_LIMIT: f64 = std::f64::consts::FRAC_PI_4;
/// Gimbal change per manual `cam_up` / `cam_down`.
pub const MANUAL_PITCH_STEP: f64 = std::f64::consts::PI / 36.0;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("no frame rendered yet")]
    NoFrame,
    #[error("cannot track: {0}")]
    Track(#[from] KcfError),
    #[error("no target selected; send SELECT_TARGET first")]
    NoTarget,
    #[error("unknown parameter '{0}'")]
    UnknownParam(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Scene(#[from] hexwatch::scene::SceneError),
}

/// What FRAME messages carry as the picture.
#[derive(Debug, Clone, Default, PartialEq)]
pub enum ImageMode {
    #[default]
    None,
    Inline,
    /// Write `frame_00000.png` files here and send their paths.
    Directory(PathBuf),
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub world: SceneConfig,
    pub pipeline: PipelineParams,
    pub controller: ControllerParams,
    pub kcf: KcfParams,
    pub gait: GaitParams,
    pub images: ImageMode,
    /// Shift the tracker window by the image motion the robot's own turn
    /// and gimbal moves are expected to cause.
    pub ego_prediction: bool,
}

impl SessionConfig {
    pub fn new(world: SceneConfig) -> Self {
        Self {
            world,
            pipeline: PipelineParams::default(),
            controller: ControllerParams::default(),
            kcf: KcfParams::default(),
            gait: GaitParams::default(),
            images: ImageMode::None,
            ego_prediction: true,
        }
    }
}

/// One RCP frame as sent over the link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RcpRecord {
    pub frame: u64,
    pub bytes: [u8; 3],
    pub command: RcpCommand,
}

/// Everything one tick produced.
#[derive(Debug, Clone)]
pub struct TickOutput {
    pub frame: u64,
    pub mode: Mode,
    pub truth: TruthEntry,
    pub boxes: Vec<BoundingBox>,
    pub track: Option<TrackResult>,
    pub offset: Option<Offset>,
    pub rcp: Option<RcpRecord>,
    /// FRAME, STATUS and any ERROR, in that order of relevance.
    pub messages: Vec<ServerMessage>,
}

struct Tracked {
    state: TrackState,
    /// Pose and gimbal at which the tracker last saw the scene.
    pose: BodyPose,
    pitch: f64,
}

pub struct Session {
    cfg: SessionConfig,
    mode: Mode,
    detector: Detector,
    track: Option<Tracked>,
    gait: GaitState,
    pose: BodyPose,
    pitch: f64,
    frame: u64,
    prev: Option<Frame>,
    manual: VecDeque<Direction>,
    link: Vec<u8>,
    rcp_log: Vec<RcpRecord>,
    rcp_sink: Option<Box<dyn Write + Send>>,
    event_log: Option<Box<dyn Write + Send>>,
    fps: f64,
}

impl Session {
    pub fn new(cfg: SessionConfig) -> Result<Self, SessionError> {
        cfg.world.validate()?;
        cfg.controller.validate().map_err(SessionError::InvalidParams)?;
        cfg.kcf.validate()?;
        let detector = Detector::new(cfg.pipeline)?;
        Ok(Self {
            cfg,
            mode: Mode::Monitoring,
            detector,
            track: None,
            gait: GaitState::idle(),
            pose: BodyPose::default(),
            pitch: 0.0,
            frame: 0,
            prev: None,
            manual: VecDeque::new(),
            link: Vec::new(),
            rcp_log: Vec::new(),
            rcp_sink: None,
            event_log: None,
            fps: 0.0,
        })
    }

    /// Copy every RCP frame (length-prefixed) to `sink`.
    pub fn set_rcp_sink(&mut self, sink: Box<dyn Write + Send>) {
        self.rcp_sink = Some(sink);
    }

    /// Append JSON-lines session events to `sink`.
    pub fn set_event_log(&mut self, sink: Box<dyn Write + Send>) {
        self.event_log = Some(sink);
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn pose(&self) -> BodyPose {
        self.pose
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn gait(&self) -> &GaitState {
        &self.gait
    }

    /// Index of the next frame to render.
    pub fn frame(&self) -> u64 {
        self.frame
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn is_tracking(&self) -> bool {
        self.track.is_some()
    }

    pub fn rcp_log(&self) -> &[RcpRecord] {
        &self.rcp_log
    }

    pub fn status(&self) -> StatusPayload {
        StatusPayload {
            frame: self.frame,
            mode: self.mode,
            pose: self.pose,
            pitch: self.pitch,
            gait: self.gait.mode,
            fps: self.fps,
            rcp_frames: self.rcp_log.len() as u64,
        }
    }

    fn log_event(&mut self, event: &str, body: serde_json::Value) {
        if let Some(log) = &mut self.event_log {
            let line = serde_json::json!({ "frame": self.frame, "event": event, "data": body });
            // the event log is best effort and never stops the loop
            let _ = writeln!(log, "{line}");
        }
    }

    /// Apply one operator message. `Ok(Some(_))` is a direct reply to the
    /// sender; errors leave the session unchanged.
    pub fn handle_message(&mut self, m: OperatorMessage) -> Result<Option<ServerMessage>, SessionError> {
        self.log_event("message", serde_json::to_value(&m).unwrap_or_default());
        let result = self.apply(m);
        if let Err(e) = &result {
            self.log_event("error", serde_json::Value::String(e.to_string()));
        }
        result
    }

    fn apply(&mut self, m: OperatorMessage) -> Result<Option<ServerMessage>, SessionError> {
        match m {
            OperatorMessage::SelectTarget { bbox } => {
                let frame = self.prev.as_ref().ok_or(SessionError::NoFrame)?;
                let state = init_track(frame, bbox, self.cfg.kcf)?;
                self.track = Some(Tracked { state, pose: self.pose, pitch: self.pitch });
                self.manual.clear();
                self.mode = Mode::Tracking;
            }
            OperatorMessage::SetMode { mode } => match mode {
                Mode::Tracking if self.track.is_none() => return Err(SessionError::NoTarget),
                Mode::Tracking => self.mode = Mode::Tracking,
                Mode::Monitoring | Mode::Manual => {
                    if self.mode != mode {
                        self.track = None;
                        self.manual.clear();
                        self.detector.reset();
                    }
                    self.mode = mode;
                }
            },
            OperatorMessage::ManualCmd { direction } => {
                self.track = None;
                self.mode = Mode::Manual;
                self.manual.push_back(direction);
            }
            OperatorMessage::SetParams { params } => self.set_params(&params)?,
            OperatorMessage::Ping => return Ok(Some(ServerMessage::Status(self.status()))),
        }
        Ok(None)
    }

    fn set_params(&mut self, params: &BTreeMap<String, f64>) -> Result<(), SessionError> {
        let mut pipeline = self.cfg.pipeline;
        let mut controller = self.cfg.controller;
        let invalid = |name: &str, v: f64| SessionError::InvalidParams(format!("{name} = {v}"));
        for (name, &v) in params {
            if !v.is_finite() {
                return Err(invalid(name, v));
            }
            let m = &mut pipeline.merge;
            match name.as_str() {
                "th1" => m.th1 = v,
                "th2" => m.th2 = v,
                "th3" => m.th3 = v,
                "th4" => m.th4 = v,
                "th5" => m.th5 = v,
                "th6" => m.th6 = v,
                "th" => controller.th = v,
                "k_yaw" => controller.k_yaw = v,
                "k_pitch" => controller.k_pitch = v,
                "diff_threshold" if v.fract() == 0.0 && (0.0..=255.0).contains(&v) => pipeline.diff_threshold = v as u8,
                "min_area" if v.fract() == 0.0 && v >= 1.0 => pipeline.min_area = v as usize,
                "diff_threshold" | "min_area" => return Err(invalid(name, v)),
                other => return Err(SessionError::UnknownParam(other.to_string())),
            }
        }
        pipeline.validate().map_err(|e| SessionError::InvalidParams(e.to_string()))?;
        controller.validate().map_err(SessionError::InvalidParams)?;
        if pipeline.diff_threshold != self.cfg.pipeline.diff_threshold || pipeline.min_area != self.cfg.pipeline.min_area {
            self.detector = Detector::new(pipeline)?;
        } else {
            self.detector.set_merge_params(pipeline.merge)?;
        }
        self.cfg.pipeline = pipeline;
        self.cfg.controller = controller;
        Ok(())
    }

    /// Advance the world by one frame and one gait step.
    pub fn tick(&mut self) -> TickOutput {
        let started = Instant::now();
        let n = self.frame;
        let (frame, truth) = render_frame(&self.cfg.world, &self.pose, self.pitch, n);
        let mut boxes = Vec::new();
        let mut track = None;
        let mut offset = None;
        let mut rcp_record = None;
        let mut messages = Vec::new();

        match self.mode {
            Mode::Monitoring => {
                if let Some(prev) = &self.prev {
                    match self.detector.detect_step(prev, &frame) {
                        Ok(d) => boxes = d.boxes().collect(),
                        Err(e) => messages.push(ServerMessage::error(format!("detection failed: {e}"))),
                    }
                }
            }
            Mode::Tracking => match self.track_step(&frame) {
                Ok((r, off, rec)) => {
                    track = Some(r);
                    offset = Some(off);
                    rcp_record = rec;
                }
                Err(e) => {
                    messages.push(ServerMessage::error(format!("target lost: {e}")));
                    self.track = None;
                    self.mode = Mode::Monitoring;
                    self.detector.reset();
                }
            },
            Mode::Manual => {
                if let Some(cmd) = self.manual.pop_front() {
                    self.apply_manual(cmd);
                }
            }
        }

        let (gait, pose, _joints) = self.gait.step(&self.pose, &self.cfg.gait);
        self.gait = gait;
        self.pose = pose;

        let image = self.frame_image(&frame);
        messages.insert(
            0,
            ServerMessage::Frame(FramePayload {
                frame: n,
                width: frame.width(),
                height: frame.height(),
                image,
                boxes: boxes.clone(),
                track_box: track.map(|t| t.bbox),
                offset,
            }),
        );
        self.prev = Some(frame);
        self.frame = n + 1;

        let dt = started.elapsed().as_secs_f64().max(1e-6);
        self.fps = if self.fps == 0.0 { 1.0 / dt } else { 0.8 * self.fps + 0.2 / dt };
        let status = self.status();
        messages.insert(1, ServerMessage::Status(status));
        self.log_event(
            "tick",
            serde_json::json!({
                "mode": self.mode,
                "boxes": boxes.len(),
                "offset": offset,
                "rcp": rcp_record.map(|r| r.bytes),
                "pose": self.pose,
            }),
        );
        TickOutput { frame: n, mode: self.mode, truth, boxes, track, offset, rcp: rcp_record, messages }
    }

    fn track_step(&mut self, frame: &Frame) -> Result<(TrackResult, Offset, Option<RcpRecord>), KcfError> {
        let cam = self.cfg.world.camera;
        let (cx0, cy0) = (f64::from(cam.width) / 2.0, f64::from(cam.height) / 2.0);
        let tracked = self.track.as_mut().expect("tracking mode implies a tracker");
        if self.cfg.ego_prediction {
            let c = tracked.state.bbox.center();
            let (x, y) = predict_pixel(
                (c.x - cx0, c.y - cy0),
                self.pose.heading - tracked.pose.heading,
                self.pitch - tracked.pitch,
                cam.focal_px,
            );
            let b = tracked.state.bbox;
            tracked.state.bbox = BoundingBox::from_center(x + cx0, y + cy0, b.w, b.h);
        }
        let r = update_track(&mut tracked.state, frame)?;
        tracked.pose = self.pose;
        tracked.pitch = self.pitch;
        let c = r.bbox.center();
        let off = Offset { dx: c.x - cx0, dy: c.y - cy0 };

        let mut record = None;
        if self.gait.at_cycle_boundary() {
            let p = &self.cfg.controller;
            let clamp = |v: f64| v.round().clamp(-f64::from(MAX_OFFSET), f64::from(MAX_OFFSET)) as i16;
            let cmd = RcpCommand::new(off.dx.abs() > p.th, off.dy.abs() > p.th, clamp(off.dx), clamp(off.dy));
            let rec = self.send_rcp(cmd);
            record = Some(rec);
        }
        Ok((r, off, record))
    }

    /// Encode, frame, transmit and decode on the robot side.
    fn send_rcp(&mut self, cmd: RcpCommand) -> RcpRecord {
        self.link.clear();
        rcp::write_frame(&mut self.link, &cmd).expect("offsets are clamped to the codec range");
        if let Some(sink) = &mut self.rcp_sink {
            let _ = sink.write_all(&self.link);
        }
        let bytes = [self.link[1], self.link[2], self.link[3]];
        let received = rcp::read_frame(&mut self.link.as_slice())
            .expect("a frame we just wrote decodes")
            .expect("link holds one frame");
        self.robot_apply(&received);
        let rec = RcpRecord { frame: self.frame, bytes, command: cmd };
        self.rcp_log.push(rec);
        rec
    }

    /// Robot-side handling of a decoded command.
    fn robot_apply(&mut self, c: &RcpCommand) {
        let p = self.cfg.controller;
        if c.turn {
            self.gait = self.gait.begin_turn(yaw_command(f64::from(c.dx), &p));
        }
        if c.gimbal {
            self.pitch = (self.pitch - pitch_command(f64::from(c.dy), &p)).clamp(-PITCH_LIMIT, PITCH_LIMIT);
        }
    }

    fn apply_manual(&mut self, d: Direction) {
        match d {
            Direction::Forward => self.gait = self.gait.walk(1),
            Direction::Left => self.gait = self.gait.begin_turn(-MAX_TURN),
            Direction::Right => self.gait = self.gait.begin_turn(MAX_TURN),
            Direction::CamUp => self.pitch = (self.pitch + MANUAL_PITCH_STEP).min(PITCH_LIMIT),
            Direction::CamDown => self.pitch = (self.pitch - MANUAL_PITCH_STEP).max(-PITCH_LIMIT),
            Direction::Stop => self.gait = self.gait.stop(),
        }
    }

    fn frame_image(&self, frame: &Frame) -> Option<ImageRef> {
        match &self.cfg.images {
            ImageMode::None => None,
            ImageMode::Inline => encode_png(frame)
                .ok()
                .map(|png| ImageRef::Png { data: base64::engine::general_purpose::STANDARD.encode(png) }),
            ImageMode::Directory(dir) => {
                let path = dir.join(format!("frame_{:05}.png", frame.index()));
                hexwatch::imgproc::write_frame(frame, &path)
                    .ok()
                    .map(|_| ImageRef::File { path: path.display().to_string() })
            }
        }
    }
}

/// Where a pixel offset from the image centre lands after the camera turns
/// right by `dyaw` and tilts up by `dpitch`.
pub fn predict_pixel((x, y): (f64, f64), dyaw: f64, dpitch: f64, focal: f64) -> (f64, f64) {
    let nx = focal * ((x / focal).atan() - dyaw).tan();
    let ny = focal * ((y / focal).atan() + dpitch).tan();
    (nx, ny)
}

pub fn encode_png(frame: &Frame) -> Result<Vec<u8>, image::ImageError> {
    let raw: Vec<u8> = frame.pixels().iter().flatten().copied().collect();
    let img = image::RgbImage::from_raw(frame.width(), frame.height(), raw).expect("frame buffer matches its size");
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)?;
    Ok(out.into_inner())
}
