//! Newline-delimited JSON wire format shared by the teleoperation link and
//! the session server. One message per line, tagged by `type`.

use crate::lockstate::StiffnessMode;
use crate::scenario::{Outcome, SPEC_VERSION};
use crate::types::{Deflection6, Pose6, Wrench6};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Longest accepted line, bytes. Longer input is rejected before parsing.
pub const MAX_LINE: usize = 64 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Streams commands and receives feedback. At most one per session.
    Leader,
    /// Runs the simulated arm.
    Follower,
    /// Receives state frames only.
    Observer,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Leader => "leader",
            Role::Follower => "follower",
            Role::Observer => "observer",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TeleopMessage {
    /// Leader to follower: target TCP pose and lever position.
    Command { seq: u64, t: f64, pose: Pose6, mode: StiffnessMode },
    /// Follower to leader: wrench at the flange.
    Feedback { seq: u64, t: f64, wrench: Wrench6, estop: bool },
    Hello { spec_version: u32, role: Role },
    Bye { reason: String },
}

impl TeleopMessage {
    pub fn hello(role: Role) -> Self {
        TeleopMessage::Hello { spec_version: SPEC_VERSION, role }
    }

    pub fn bye(reason: impl Into<String>) -> Self {
        TeleopMessage::Bye { reason: reason.into() }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            TeleopMessage::Command { .. } => "command",
            TeleopMessage::Feedback { .. } => "feedback",
            TeleopMessage::Hello { .. } => "hello",
            TeleopMessage::Bye { .. } => "bye",
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            TeleopMessage::Command { t, pose, .. } => t.is_finite() && pose.is_finite(),
            TeleopMessage::Feedback { t, wrench, .. } => t.is_finite() && wrench.is_finite(),
            _ => true,
        }
    }
}

/// Scenario progress carried in a state frame. Peg sessions report the
/// insertion depth, door sessions the handle angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSummary {
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub insertion_depth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub handle_angle: Option<f64>,
    pub latch_released: bool,
}

/// Broadcast snapshot of a session, one per 20 ms of simulated time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename = "state")]
pub struct StateFrame {
    pub t: f64,
    pub pose: Pose6,
    pub deflection: Deflection6,
    pub wrench: Wrench6,
    pub mode: StiffnessMode,
    pub carrier_position: f64,
    pub estop: bool,
    pub scenario: ScenarioSummary,
}

impl StateFrame {
    fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.pose.is_finite()
            && self.deflection.is_finite()
            && self.wrench.is_finite()
            && self.carrier_position.is_finite()
            && self.scenario.insertion_depth.is_none_or(f64::is_finite)
            && self.scenario.handle_angle.is_none_or(f64::is_finite)
    }
}

/// Anything that travels on a session stream.
#[derive(Debug, Clone, PartialEq)]
pub enum WireMessage {
    Teleop(TeleopMessage),
    State(StateFrame),
}

impl From<TeleopMessage> for WireMessage {
    fn from(m: TeleopMessage) -> Self {
        WireMessage::Teleop(m)
    }
}

impl From<StateFrame> for WireMessage {
    fn from(f: StateFrame) -> Self {
        WireMessage::State(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("malformed message at byte {offset}: {message}")]
    Malformed { offset: usize, message: String },
    #[error("cannot encode {0}: non-finite number")]
    NonFinite(&'static str),
}

impl CodecError {
    fn malformed(offset: usize, message: impl Into<String>) -> Self {
        CodecError::Malformed { offset, message: message.into() }
    }
}

/// One line, terminated by `\n`.
pub fn encode(msg: &TeleopMessage) -> Result<Vec<u8>, CodecError> {
    if !msg.is_finite() {
        return Err(CodecError::NonFinite(msg.kind()));
    }
    Ok(line(msg))
}

pub fn encode_frame(frame: &StateFrame) -> Result<Vec<u8>, CodecError> {
    if !frame.is_finite() {
        return Err(CodecError::NonFinite("state"));
    }
    Ok(line(frame))
}

pub fn encode_wire(msg: &WireMessage) -> Result<Vec<u8>, CodecError> {
    match msg {
        WireMessage::Teleop(m) => encode(m),
        WireMessage::State(f) => encode_frame(f),
    }
}

fn line<T: Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec(v).expect("wire types serialize");
    out.push(b'\n');
    out
}

/// Decodes a single line. A trailing `\n` or `\r\n` is accepted.
pub fn decode(bytes: &[u8]) -> Result<TeleopMessage, CodecError> {
    match decode_wire(bytes)? {
        WireMessage::Teleop(m) => Ok(m),
        WireMessage::State(_) => Err(CodecError::malformed(0, "state frames are server to client only")),
    }
}

pub fn decode_wire(bytes: &[u8]) -> Result<WireMessage, CodecError> {
    let body = strip_terminator(bytes);
    if let Some(i) = body.iter().position(|&b| b == b'\n') {
        return Err(CodecError::malformed(i, "more than one line"));
    }
    if body.len() > MAX_LINE {
        return Err(CodecError::malformed(MAX_LINE, format!("line longer than {MAX_LINE} bytes")));
    }
    let value: serde_json::Value = serde_json::from_slice(body).map_err(|e| json_error(body, &e))?;
    let kind = value.get("type").and_then(|t| t.as_str()).map(str::to_owned);
    match kind.as_deref() {
        None => Err(CodecError::malformed(0, "missing string field `type`")),
        Some("state") => serde_json::from_slice(body).map(WireMessage::State).map_err(|e| json_error(body, &e)),
        Some(_) => serde_json::from_slice(body).map(WireMessage::Teleop).map_err(|e| json_error(body, &e)),
    }
}

fn strip_terminator(bytes: &[u8]) -> &[u8] {
    let b = bytes.strip_suffix(b"\n").unwrap_or(bytes);
    b.strip_suffix(b"\r").unwrap_or(b)
}

/// Converts serde_json's 1-based line/column into a byte offset.
fn json_error(body: &[u8], e: &serde_json::Error) -> CodecError {
    let mut offset = 0;
    for _ in 1..e.line() {
        match body[offset..].iter().position(|&b| b == b'\n') {
            Some(i) => offset += i + 1,
            None => break,
        }
    }
    let offset = match e.classify() {
        serde_json::error::Category::Eof => body.len(),
        _ => (offset + e.column().saturating_sub(1)).min(body.len()),
    };
    CodecError::malformed(offset, e.to_string())
}

/// Splits a byte stream into lines and decodes each one. Error offsets
/// count from the first byte ever fed.
#[derive(Debug, Default)]
pub struct LineDecoder {
    buf: Vec<u8>,
    consumed: usize,
    /// Set while skipping the rest of an overlong line.
    discarding: bool,
}

impl LineDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn feed(&mut self, bytes: &[u8]) -> Vec<Result<WireMessage, CodecError>> {
        let mut out = Vec::new();
        self.buf.extend_from_slice(bytes);
        while let Some(i) = self.buf.iter().position(|&b| b == b'\n') {
            let line: Vec<u8> = self.buf.drain(..=i).collect();
            let start = self.consumed;
            self.consumed += line.len();
            if std::mem::take(&mut self.discarding) {
                continue;
            }
            if strip_terminator(&line).iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            out.push(decode_wire(&line).map_err(|e| shift(e, start)));
        }
        if self.buf.len() > MAX_LINE && !self.discarding {
            out.push(Err(CodecError::malformed(self.consumed + MAX_LINE, "line too long")));
            self.discarding = true;
        }
        if self.discarding {
            self.consumed += self.buf.len();
            self.buf.clear();
        }
        out
    }

    /// Reports an unterminated trailing line at end of stream.
    pub fn finish(self) -> Option<Result<WireMessage, CodecError>> {
        if self.discarding || self.buf.iter().all(u8::is_ascii_whitespace) {
            return None;
        }
        Some(decode_wire(&self.buf).map_err(|e| shift(e, self.consumed)))
    }
}

fn shift(e: CodecError, by: usize) -> CodecError {
    match e {
        CodecError::Malformed { offset, message } => CodecError::Malformed { offset: offset + by, message },
        other => other,
    }
}
