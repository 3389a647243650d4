//! One task per session: owns the simulation and steps it window by window.

use crate::state::Shared;
use claw_core::controller::COMMAND_PERIOD;
use claw_core::teleop::{FollowerSession, Role, StateFrame, TeleopMessage};
use std::collections::VecDeque;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Duration;
use tokio::sync::{broadcast, mpsc};
use tokio::time::Instant;

const T_EPS: f64 = 1e-9;

/// How simulated time maps to wall time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pacing {
    /// Simulated seconds per wall second.
    RealTime { time_scale: f64 },
    /// As fast as possible. A session with a commander advances only as far
    /// as the commander's latest command stamp, so results do not depend on
    /// network timing.
    Unpaced,
}

impl Pacing {
    pub const MIN_SCALE: f64 = 0.1;
    pub const MAX_SCALE: f64 = 10.0;

    pub fn real_time(time_scale: f64) -> Result<Self, String> {
        if (Self::MIN_SCALE..=Self::MAX_SCALE).contains(&time_scale) {
            Ok(Pacing::RealTime { time_scale })
        } else {
            Err(format!("time scale must be within [{}, {}], got {time_scale}", Self::MIN_SCALE, Self::MAX_SCALE))
        }
    }

    /// Wall time per 20 ms window, `None` when unpaced.
    pub fn window(&self) -> Option<Duration> {
        match *self {
            Pacing::RealTime { time_scale } => Some(Duration::from_secs_f64(COMMAND_PERIOD / time_scale)),
            Pacing::Unpaced => None,
        }
    }
}

/// Broadcast to every attached client.
#[derive(Debug, Clone, PartialEq)]
pub enum Outbound {
    Frame(StateFrame),
    /// Only the commander forwards these.
    Feedback(TeleopMessage),
    Bye(String),
}

#[derive(Debug)]
pub(crate) enum Control {
    Start,
    CommanderJoined,
    Command(TeleopMessage),
    CommanderGone,
    /// Panics inside the stepper; exercises crash containment.
    Fault,
}

pub(crate) struct Worker {
    pub shared: Arc<Shared>,
    pub id: String,
    pub session: FollowerSession,
    pub rx: mpsc::UnboundedReceiver<Control>,
    pub out: broadcast::Sender<Outbound>,
    pub pacing: Pacing,
}

impl Worker {
    pub async fn run(mut self) {
        let mut queue: VecDeque<TeleopMessage> = VecDeque::new();
        let mut lock = Lockstep { commander: false, horizon: f64::NEG_INFINITY };
        let mut fault = false;
        // Paused until the first client attaches.
        loop {
            match self.rx.recv().await {
                Some(Control::Start) => break,
                Some(c) => self.control(c, &mut queue, &mut lock, &mut fault),
                None => return,
            }
        }
        self.shared.mark_running(&self.id);
        self.session.receive(TeleopMessage::hello(Role::Leader));
        let start = Instant::now();
        let mut k: u64 = 0;
        loop {
            // Pull in everything already sent.
            loop {
                match self.rx.try_recv() {
                    Ok(c) => self.control(c, &mut queue, &mut lock, &mut fault),
                    Err(mpsc::error::TryRecvError::Empty) => break,
                    Err(mpsc::error::TryRecvError::Disconnected) => return,
                }
            }
            let now_t = self.session.simulation().time();
            if self.pacing == Pacing::Unpaced && lock.commander && lock.horizon < now_t - T_EPS {
                match self.rx.recv().await {
                    Some(c) => self.control(c, &mut queue, &mut lock, &mut fault),
                    None => return,
                }
                continue;
            }
            while let Some(m) = queue.front() {
                if self.pacing == Pacing::Unpaced && stamp(m) > now_t + T_EPS {
                    break;
                }
                let m = queue.pop_front().expect("front exists");
                if let Some(TeleopMessage::Bye { reason }) = self.session.receive(m).into_iter().next() {
                    self.finish(reason);
                    return;
                }
            }

            let step = catch_unwind(AssertUnwindSafe(|| {
                if fault {
                    panic!("injected fault");
                }
                self.session.advance()
            }));
            match step {
                Err(panic) => {
                    let msg = panic
                        .downcast_ref::<&str>()
                        .map(|s| s.to_string())
                        .or_else(|| panic.downcast_ref::<String>().cloned())
                        .unwrap_or_else(|| "unknown panic".into());
                    tracing::error!(session = %self.id, "session stepper panicked: {msg}");
                    self.finish(format!("internal error: {msg}"));
                    return;
                }
                Ok(None) => {
                    let reason = self.session.close_reason().unwrap_or("session closed").to_string();
                    self.finish(reason);
                    return;
                }
                Ok(Some(w)) => {
                    let _ = self.out.send(Outbound::Feedback(w.feedback));
                    let _ = self.out.send(Outbound::Frame(w.frame));
                    if let Some(TeleopMessage::Bye { reason }) = w.bye {
                        self.finish(reason);
                        return;
                    }
                }
            }
            k += 1;
            match self.pacing.window() {
                Some(period) => tokio::time::sleep_until(start + period.mul_f64(k as f64)).await,
                None => tokio::task::yield_now().await,
            }
        }
    }

    fn control(&mut self, c: Control, queue: &mut VecDeque<TeleopMessage>, lock: &mut Lockstep, fault: &mut bool) {
        match c {
            Control::Start => {}
            Control::CommanderJoined => lock.commander = true,
            Control::Command(m) => {
                lock.horizon = lock.horizon.max(stamp(&m));
                queue.push_back(m);
            }
            Control::CommanderGone => lock.commander = false,
            Control::Fault => *fault = true,
        }
    }

    fn finish(&mut self, reason: String) {
        let log = self.session.log();
        self.shared.mark_terminal(&self.id, log, self.session.outcome(), &reason);
        let _ = self.out.send(Outbound::Bye(reason));
    }
}

/// Unpaced sessions with a commander only step up to the latest command stamp.
struct Lockstep {
    commander: bool,
    horizon: f64,
}

fn stamp(m: &TeleopMessage) -> f64 {
    match m {
        TeleopMessage::Command { t, .. } | TeleopMessage::Feedback { t, .. } => *t,
        _ => f64::NEG_INFINITY,
    }
}
