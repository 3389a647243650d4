//! Socket side of a session: one NDJSON line per text frame in both directions.

use crate::error::ApiError;
use crate::state::{AppState, Attachment, Commander};
use crate::worker::Outbound;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::response::Response;
use claw_core::scenario::Outcome;
use claw_core::teleop::{
    encode, encode_frame, EpisodeLog, LineDecoder, Role, ScenarioSummary, StateFrame, TeleopMessage, WireMessage,
};
use claw_core::controller::COMMAND_PERIOD;
use claw_core::scenario::SPEC_VERSION;
use futures::{SinkExt, StreamExt};
use serde::Deserialize;
use tokio::sync::broadcast::error::RecvError;

#[derive(Debug, Deserialize)]
pub struct StreamQuery {
    role: Option<Role>,
}

pub async fn stream(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<StreamQuery>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let role = q.role.unwrap_or(Role::Leader);
    let attachment = app.attach(&id, role)?;
    let window = app.config().pacing.window();
    Ok(ws.on_upgrade(move |socket| async move {
        match attachment {
            Attachment::Live { frames, commander } => live(socket, frames, commander).await,
            Attachment::Replay { log, outcome, reason } => replay(socket, log, outcome, reason, window).await,
        }
    }))
}

fn text(bytes: Vec<u8>) -> Message {
    Message::Text(String::from_utf8(bytes).expect("encoder emits UTF-8").into())
}

fn bye(reason: impl Into<String>) -> Message {
    text(encode(&TeleopMessage::bye(reason)).expect("bye encodes"))
}

fn hello() -> Message {
    text(encode(&TeleopMessage::hello(Role::Follower)).expect("hello encodes"))
}

enum Inbound {
    Continue,
    Close(Option<String>),
}

/// Applies one decoded client line. Returns a Bye reason when the client
/// broke the protocol.
fn inbound(msg: Result<WireMessage, claw_core::teleop::CodecError>, greeted: &mut bool, commander: Option<&Commander>) -> Inbound {
    match msg {
        Err(e) => Inbound::Close(Some(format!("protocol violation: {e}"))),
        Ok(WireMessage::Teleop(TeleopMessage::Hello { spec_version, .. })) => {
            if spec_version != SPEC_VERSION {
                return Inbound::Close(Some(format!(
                    "protocol violation: version mismatch: client speaks {spec_version}, server {SPEC_VERSION}"
                )));
            }
            *greeted = true;
            Inbound::Continue
        }
        Ok(WireMessage::Teleop(m @ TeleopMessage::Command { .. })) => match commander {
            None => Inbound::Close(Some("protocol violation: observers cannot send commands".into())),
            Some(_) if !*greeted => Inbound::Close(Some("protocol violation: command before hello".into())),
            Some(c) => {
                c.send(m);
                Inbound::Continue
            }
        },
        Ok(WireMessage::Teleop(TeleopMessage::Bye { .. })) => Inbound::Close(None),
        Ok(other) => {
            let kind = match other {
                WireMessage::Teleop(m) => m.kind(),
                WireMessage::State(_) => "state",
            };
            Inbound::Close(Some(format!("protocol violation: clients may not send {kind}")))
        }
    }
}

async fn live(
    socket: WebSocket,
    mut frames: tokio::sync::broadcast::Receiver<Outbound>,
    commander: Option<Commander>,
) {
    let (mut tx, mut rx) = socket.split();
    if tx.send(hello()).await.is_err() {
        return;
    }
    let mut decoder = LineDecoder::new();
    let mut greeted = false;
    loop {
        tokio::select! {
            out = frames.recv() => {
                let msg = match out {
                    Ok(Outbound::Frame(f)) => match encode_frame(&f) {
                        Ok(b) => text(b),
                        Err(e) => { tracing::warn!("dropping frame: {e}"); continue; }
                    },
                    Ok(Outbound::Feedback(m)) if commander.is_some() => match encode(&m) {
                        Ok(b) => text(b),
                        Err(e) => { tracing::warn!("dropping feedback: {e}"); continue; }
                    },
                    Ok(Outbound::Feedback(_)) => continue,
                    Ok(Outbound::Bye(reason)) => {
                        let _ = tx.send(bye(reason)).await;
                        break;
                    }
                    Err(RecvError::Lagged(n)) => { tracing::debug!("client lagged by {n} messages"); continue; }
                    Err(RecvError::Closed) => {
                        let _ = tx.send(bye("session deleted")).await;
                        break;
                    }
                };
                if tx.send(msg).await.is_err() {
                    break;
                }
            }
            incoming = rx.next() => {
                let bytes = match incoming {
                    Some(Ok(Message::Text(t))) => t.as_bytes().to_vec(),
                    Some(Ok(Message::Binary(b))) => b.to_vec(),
                    Some(Ok(Message::Ping(_) | Message::Pong(_))) => continue,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                };
                let mut bytes = bytes;
                if !bytes.ends_with(b"\n") {
                    bytes.push(b'\n');
                }
                let mut close = None;
                for m in decoder.feed(&bytes) {
                    if let Inbound::Close(reason) = inbound(m, &mut greeted, commander.as_ref()) {
                        close = Some(reason);
                        break;
                    }
                }
                if let Some(reason) = close {
                    if let Some(r) = reason {
                        let _ = tx.send(bye(r)).await;
                    }
                    break;
                }
            }
        }
    }
    let _ = tx.close().await;
}

/// Frames rebuilt from a stored log. Carrier position is the seat of the
/// logged lever; the final row carries the session outcome.
pub fn replay_frames(log: &EpisodeLog, outcome: Option<Outcome>) -> Vec<StateFrame> {
    let mut latch = false;
    let n = log.rows.len();
    log.rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            latch |= r.event.split(';').any(|e| e == "latch_released");
            StateFrame {
                t: r.t,
                pose: r.pose,
                deflection: r.deflection,
                wrench: r.wrench,
                mode: r.mode,
                carrier_position: r.mode.carrier_position(),
                estop: r.estop,
                scenario: ScenarioSummary {
                    outcome: if i + 1 == n { outcome.unwrap_or_default() } else { Outcome::Running },
                    insertion_depth: None,
                    handle_angle: None,
                    latch_released: latch,
                },
            }
        })
        .collect()
}

async fn replay(
    socket: WebSocket,
    log: EpisodeLog,
    outcome: Option<Outcome>,
    reason: String,
    window: Option<std::time::Duration>,
) {
    let (mut tx, mut rx) = socket.split();
    if tx.send(hello()).await.is_err() {
        return;
    }
    let frames = replay_frames(&log, outcome);
    let period = window.unwrap_or(std::time::Duration::from_secs_f64(COMMAND_PERIOD));
    let mut tick = tokio::time::interval(period);
    let mut i = 0;
    loop {
        tokio::select! {
            _ = tick.tick() => {
                let Some(f) = frames.get(i) else {
                    let _ = tx.send(bye(format!("replay finished: {reason}"))).await;
                    break;
                };
                i += 1;
                let Ok(b) = encode_frame(f) else { continue };
                if tx.send(text(b)).await.is_err() {
                    break;
                }
            }
            incoming = rx.next() => match incoming {
                Some(Ok(Message::Text(t))) if matches!(
                    claw_core::teleop::decode(t.as_bytes()),
                    Ok(TeleopMessage::Command { .. })
                ) => {
                    let _ = tx.send(bye("protocol violation: session is terminal and read-only")).await;
                    break;
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                _ => {}
            }
        }
    }
    let _ = tx.close().await;
}
