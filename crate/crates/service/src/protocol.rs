//! JSON messages exchanged over `/ws`.
//!
//! Every message is an object with a `"kind"` tag. Operators send
//! `SELECT_TARGET`, `SET_MODE`, `MANUAL_CMD`, `SET_PARAMS` and `PING`; the
//! server sends `FRAME`, `STATUS` and `ERROR`.

use hexwatch::gait::{BodyPose, GaitMode};
use hexwatch::BoundingBox;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Monitoring,
    Tracking,
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Left,
    Right,
    CamUp,
    CamDown,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE", deny_unknown_fields)]
pub enum OperatorMessage {
    SelectTarget { bbox: BoundingBox },
    SetMode { mode: Mode },
    ManualCmd { direction: Direction },
    /// Named numeric parameters, see [`crate::session::PARAM_NAMES`].
    SetParams { params: BTreeMap<String, f64> },
    Ping,
}

/// How a FRAME carries its picture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ImageRef {
    /// Base64-encoded PNG.
    Png { data: String },
    /// Numbered PNG written to disk by a headless server.
    File { path: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Offset {
    pub dx: f64,
    pub dy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramePayload {
    pub frame: u64,
    pub width: u32,
    pub height: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image: Option<ImageRef>,
    pub boxes: Vec<BoundingBox>,
    pub track_box: Option<BoundingBox>,
    /// Present only while tracking.
    pub offset: Option<Offset>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusPayload {
    pub frame: u64,
    pub mode: Mode,
    pub pose: BodyPose,
    /// Gimbal pitch, radians, up positive.
    pub pitch: f64,
    pub gait: GaitMode,
    /// Ticks processed per wall-clock second, averaged over recent ticks.
    pub fps: f64,
    /// RCP frames sent by the controller so far.
    pub rcp_frames: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ServerMessage {
    Frame(FramePayload),
    Status(StatusPayload),
    Error { message: String },
}

impl ServerMessage {
    pub fn error(message: impl Into<String>) -> Self {
        ServerMessage::Error { message: message.into() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}

/// Parse an operator message, describing what is wrong on failure.
pub fn parse_operator_message(text: &str) -> Result<OperatorMessage, String> {
    serde_json::from_str(text).map_err(|e| format!("malformed message: {e}"))
}
