//! Newline-delimited JSON wire protocol.
//!
//! Every frame is one line holding `{"type", "version", "payload"}`. See
//! `docs/protocol.md` for the field reference.

use lanemerge_core::{normalize_heading, VehicleState};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const PROTOCOL_VERSION: u32 = 1;
pub const DEFAULT_MAX_FRAME: usize = 64 * 1024;
pub const MAX_USER_ID: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("frame exceeds {0} bytes")]
    TooLong(usize),
    #[error("connection closed mid-frame ({0} bytes pending)")]
    Truncated(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("frame is not UTF-8")]
    Utf8,
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("unknown message type {0:?}")]
    UnknownType(String),
    #[error("unsupported protocol version {0}")]
    Version(u64),
    #[error("invalid field: {0}")]
    Invalid(String),
}

impl ProtocolError {
    /// Stable code carried in error responses.
    pub fn code(&self) -> &'static str {
        match self {
            ProtocolError::Frame(FrameError::TooLong(_)) => "frame_too_long",
            ProtocolError::Frame(FrameError::Truncated(_)) => "truncated_frame",
            ProtocolError::Utf8 | ProtocolError::Json(_) => "malformed",
            ProtocolError::UnknownType(_) => "unknown_type",
            ProtocolError::Version(_) => "unsupported_version",
            ProtocolError::Invalid(_) => "invalid_field",
        }
    }
}

type Result<T> = std::result::Result<T, ProtocolError>;

fn invalid(msg: impl Into<String>) -> ProtocolError {
    ProtocolError::Invalid(msg.into())
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite")))
    }
}

fn check_user_id(id: &str) -> Result<()> {
    if id.is_empty() || id.len() > MAX_USER_ID {
        return Err(invalid(format!(
            "user_id must have 1..={MAX_USER_ID} bytes"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Vehicle,
    Perception,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadUserDescription {
    pub user_id: String,
    /// Milliseconds since the epoch.
    pub timestamp: u64,
    pub position: Position,
    pub speed: f64,
    pub acceleration: f64,
    /// Degrees counterclockwise from +x.
    pub heading: f64,
    pub lane_id: u16,
    pub length: f64,
    pub width: f64,
    pub connected: bool,
    pub source: Source,
}

impl RoadUserDescription {
    /// Checks the invariants and wraps the heading into [0, 360).
    pub fn validate(&mut self) -> Result<()> {
        check_user_id(&self.user_id)?;
        if self.timestamp == 0 {
            return Err(invalid("timestamp must be positive"));
        }
        for (name, v) in [
            ("position.x", self.position.x),
            ("position.y", self.position.y),
            ("speed", self.speed),
            ("acceleration", self.acceleration),
            ("heading", self.heading),
            ("length", self.length),
            ("width", self.width),
        ] {
            finite(name, v)?;
        }
        if self.speed < 0.0 {
            return Err(invalid("speed must be non-negative"));
        }
        if self.length <= 0.0 || self.width <= 0.0 {
            return Err(invalid("length and width must be positive"));
        }
        self.heading = normalize_heading(self.heading);
        Ok(())
    }

    pub fn state(&self) -> VehicleState {
        VehicleState {
            x: self.position.x,
            y: self.position.y,
            speed: self.speed,
            acceleration: self.acceleration,
            length: self.length,
            width: self.width,
        }
    }
}

/// Axis-aligned region in local coordinates, bounds inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    pub const EVERYWHERE: Bounds = Bounds {
        x_min: f64::MIN,
        x_max: f64::MAX,
        y_min: f64::MIN,
        y_max: f64::MAX,
    };

    pub fn contains(&self, p: Position) -> bool {
        (self.x_min..=self.x_max).contains(&p.x) && (self.y_min..=self.y_max).contains(&p.y)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("x_min", self.x_min),
            ("x_max", self.x_max),
            ("y_min", self.y_min),
            ("y_max", self.y_max),
        ] {
            finite(name, v)?;
        }
        if self.x_min > self.x_max || self.y_min > self.y_max {
            return Err(invalid("region minimum exceeds maximum"));
        }
        Ok(())
    }
}

/// A merging vehicle asks for recommendations into `target_lane`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subscription {
    pub user_id: String,
    pub target_lane: u16,
    /// Lateral position of the target lane centre.
    pub target_lane_x: f64,
    pub region: Bounds,
}

impl Subscription {
    pub fn validate(&self) -> Result<()> {
        check_user_id(&self.user_id)?;
        finite("target_lane_x", self.target_lane_x)?;
        self.region.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub timestamp: u64,
    pub position: Position,
    pub speed: f64,
    pub acceleration: f64,
    pub heading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecommendation {
    pub recommendation_id: String,
    pub user_id: String,
    /// Timestamp of the merging vehicle's description the plan started from.
    pub based_on_ms: u64,
    pub merge_flag: bool,
    pub waypoints: Vec<Waypoint>,
}

impl TrajectoryRecommendation {
    pub fn validate(&mut self) -> Result<()> {
        check_user_id(&self.user_id)?;
        if self.recommendation_id.is_empty() {
            return Err(invalid("recommendation_id must not be empty"));
        }
        let mut last = None;
        for w in &mut self.waypoints {
            if last.is_some_and(|t| w.timestamp <= t) {
                return Err(invalid("waypoint timestamps must be strictly increasing"));
            }
            last = Some(w.timestamp);
            for (name, v) in [
                ("position.x", w.position.x),
                ("position.y", w.position.y),
                ("speed", w.speed),
                ("acceleration", w.acceleration),
                ("heading", w.heading),
            ] {
                finite(name, v)?;
            }
            w.heading = normalize_heading(w.heading);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Reject,
    Abort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManeuverFeedback {
    pub recommendation_id: String,
    pub user_id: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    RudUpdate(RoadUserDescription),
    Subscribe(Subscription),
    Recommendation(TrajectoryRecommendation),
    Feedback(ManeuverFeedback),
    Error(ErrorReport),
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::RudUpdate(_) => "rud_update",
            Message::Subscribe(_) => "subscribe",
            Message::Recommendation(_) => "recommendation",
            Message::Feedback(_) => "feedback",
            Message::Error(_) => "error",
        }
    }

    pub fn error(code: &str, message: impl Into<String>) -> Self {
        Message::Error(ErrorReport {
            code: code.to_string(),
            message: message.into(),
        })
    }
}

impl From<&ProtocolError> for Message {
    fn from(e: &ProtocolError) -> Self {
        Message::error(e.code(), e.to_string())
    }
}

#[derive(Serialize)]
struct EnvelopeOut<'a, T: Serialize> {
    #[serde(rename = "type")]
    kind: &'a str,
    version: u32,
    payload: &'a T,
}

/// JSON text of one message, without the trailing newline.
pub fn encode_message(msg: &Message) -> Vec<u8> {
    fn env<T: Serialize>(kind: &str, payload: &T) -> Vec<u8> {
        serde_json::to_vec(&EnvelopeOut {
            kind,
            version: PROTOCOL_VERSION,
            payload,
        })
        .expect("protocol types serialize")
    }
    match msg {
        Message::RudUpdate(p) => env(msg.kind(), p),
        Message::Subscribe(p) => env(msg.kind(), p),
        Message::Recommendation(p) => env(msg.kind(), p),
        Message::Feedback(p) => env(msg.kind(), p),
        Message::Error(p) => env(msg.kind(), p),
    }
}

/// One complete frame: the message followed by `\n`.
pub fn encode_frame(msg: &Message) -> Vec<u8> {
    let mut out = encode_message(msg);
    out.push(b'\n');
    out
}

fn payload<T: for<'de> Deserialize<'de>>(v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| invalid(e.to_string()))
}

/// Parses and validates one frame (without its newline).
pub fn decode_message(frame: &[u8]) -> Result<Message> {
    let text = std::str::from_utf8(frame).map_err(|_| ProtocolError::Utf8)?;
    let value: Value =
        serde_json::from_str(text).map_err(|e| ProtocolError::Json(e.to_string()))?;
    let Value::Object(mut obj) = value else {
        return Err(ProtocolError::Json("frame is not a JSON object".into()));
    };
    let kind = match obj.remove("type") {
        Some(Value::String(s)) => s,
        _ => return Err(invalid("missing string field \"type\"")),
    };
    match obj.get("version").map(Value::as_u64) {
        Some(Some(v)) if v == u64::from(PROTOCOL_VERSION) => {}
        Some(Some(v)) => return Err(ProtocolError::Version(v)),
        _ => return Err(invalid("missing integer field \"version\"")),
    }
    let body = obj
        .remove("payload")
        .ok_or_else(|| invalid("missing field \"payload\""))?;
    match kind.as_str() {
        "rud_update" => {
            let mut rud: RoadUserDescription = payload(body)?;
            rud.validate()?;
            Ok(Message::RudUpdate(rud))
        }
        "subscribe" => {
            let sub: Subscription = payload(body)?;
            sub.validate()?;
            Ok(Message::Subscribe(sub))
        }
        "recommendation" => {
            let mut rec: TrajectoryRecommendation = payload(body)?;
            rec.validate()?;
            Ok(Message::Recommendation(rec))
        }
        "feedback" => {
            let fb: ManeuverFeedback = payload(body)?;
            check_user_id(&fb.user_id)?;
            Ok(Message::Feedback(fb))
        }
        "error" => Ok(Message::Error(payload(body)?)),
        _ => Err(ProtocolError::UnknownType(kind)),
    }
}

/// Splits a byte stream into newline-terminated frames of bounded length.
///
/// An over-long line yields one `TooLong` error and is skipped up to its
/// newline; blank lines are ignored and a trailing `\r` is stripped.
#[derive(Debug)]
pub struct FrameDecoder {
    buf: Vec<u8>,
    scanned: usize,
    max_len: usize,
    discarding: bool,
}

impl Default for FrameDecoder {
    fn default() -> Self {
        Self::new(DEFAULT_MAX_FRAME)
    }
}

impl FrameDecoder {
    pub fn new(max_len: usize) -> Self {
        Self {
            buf: Vec::new(),
            scanned: 0,
            max_len,
            discarding: false,
        }
    }

    pub fn push(&mut self, data: &[u8]) {
        self.buf.extend_from_slice(data);
    }

    pub fn next_frame(&mut self) -> Option<std::result::Result<Vec<u8>, FrameError>> {
        loop {
            let newline = self.buf[self.scanned..]
                .iter()
                .position(|&b| b == b'\n')
                .map(|p| p + self.scanned);
            let Some(end) = newline else {
                self.scanned = self.buf.len();
                if self.discarding {
                    self.buf.clear();
                    self.scanned = 0;
                } else if self.buf.len() > self.max_len {
                    self.buf.clear();
                    self.scanned = 0;
                    self.discarding = true;
                    return Some(Err(FrameError::TooLong(self.max_len)));
                }
                return None;
            };
            let mut line: Vec<u8> = self.buf.drain(..=end).collect();
            self.scanned = 0;
            line.pop();
            if line.last() == Some(&b'\r') {
                line.pop();
            }
            if self.discarding {
                self.discarding = false;
                continue;
            }
            if line.len() > self.max_len {
                return Some(Err(FrameError::TooLong(self.max_len)));
            }
            if line.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            return Some(Ok(line));
        }
    }

    /// Call at end of stream: pending bytes mean the last frame was cut off.
    pub fn finish(&self) -> std::result::Result<(), FrameError> {
        if self.discarding || self.buf.iter().all(u8::is_ascii_whitespace) {
            Ok(())
        } else {
            Err(FrameError::Truncated(self.buf.len()))
        }
    }
}
