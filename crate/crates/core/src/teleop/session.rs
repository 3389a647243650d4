//! Follower side of the teleoperation link, free of any I/O. The caller
//! feeds decoded messages in and calls [`FollowerSession::advance`] once per
//! 20 ms window; replies, feedback and state frames come back as values.

use super::codec::{Role, ScenarioSummary, StateFrame, TeleopMessage};
use super::log::{EpisodeHeader, EpisodeLog};
use crate::scenario::{
    run_window, ConfigError, Outcome, Sample, ScenarioConfig, ScenarioEvent, ScenarioKind, Simulation, SPEC_VERSION,
};
use crate::types::Pose6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    AwaitingHello,
    Running,
    Closed,
}

/// What one window produced.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowOutput {
    pub feedback: TeleopMessage,
    pub frame: StateFrame,
    pub events: Vec<ScenarioEvent>,
    /// Set when the window ended the session.
    pub bye: Option<TeleopMessage>,
}

#[derive(Debug, Clone)]
pub struct FollowerSession {
    sim: Simulation,
    header: EpisodeHeader,
    phase: Phase,
    last_seq: Option<u64>,
    last_t: f64,
    command: Pose6,
    feedback_seq: u64,
    dropped: u64,
    samples: Vec<Sample>,
    pending: Vec<ScenarioEvent>,
    close_reason: Option<String>,
}

impl FollowerSession {
    pub fn new(cfg: ScenarioConfig, started: impl Into<String>) -> Result<Self, ConfigError> {
        let header = EpisodeHeader::new(&cfg, started);
        let sim = Simulation::new(cfg)?;
        let command = sim.plant().commanded_pose;
        Ok(Self {
            sim,
            header,
            phase: Phase::AwaitingHello,
            last_seq: None,
            last_t: f64::NEG_INFINITY,
            command,
            feedback_seq: 0,
            dropped: 0,
            samples: Vec::new(),
            pending: Vec::new(),
            close_reason: None,
        })
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }
    pub fn simulation(&self) -> &Simulation {
        &self.sim
    }
    /// Pose applied from the next window on.
    pub fn command(&self) -> Pose6 {
        self.command
    }
    /// Commands discarded as stale or duplicate.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }
    pub fn close_reason(&self) -> Option<&str> {
        self.close_reason.as_deref()
    }

    /// Handles one inbound message and returns the replies.
    pub fn receive(&mut self, msg: TeleopMessage) -> Vec<TeleopMessage> {
        match (self.phase, msg) {
            (Phase::Closed, _) => Vec::new(),
            (Phase::AwaitingHello, TeleopMessage::Hello { spec_version, role }) => {
                if spec_version != SPEC_VERSION {
                    return self.violation(format!(
                        "version mismatch: leader speaks {spec_version}, follower {SPEC_VERSION}"
                    ));
                }
                if role != Role::Leader {
                    return self.violation(format!("a follower session needs a leader, got {role}"));
                }
                self.phase = Phase::Running;
                vec![TeleopMessage::hello(Role::Follower)]
            }
            (Phase::AwaitingHello, other) => self.violation(format!("{} before hello", other.kind())),
            (Phase::Running, TeleopMessage::Command { seq, t, pose, mode }) => {
                if self.last_seq.is_some_and(|last| seq <= last) {
                    self.dropped += 1;
                    return Vec::new();
                }
                if t < self.last_t {
                    return self.violation(format!("command {seq} goes back in time ({t} < {})", self.last_t));
                }
                if self.last_seq.is_none() {
                    // The leader owns the lever from its first command on.
                    self.sim.clear_schedule();
                }
                self.last_seq = Some(seq);
                self.last_t = t;
                self.command = pose;
                self.pending.extend(self.sim.set_lever(mode));
                Vec::new()
            }
            (Phase::Running, TeleopMessage::Bye { reason }) => {
                self.close(format!("leader left: {reason}"));
                Vec::new()
            }
            (Phase::Running, other) => self.violation(format!("unexpected {} from leader", other.kind())),
        }
    }

    fn violation(&mut self, reason: String) -> Vec<TeleopMessage> {
        let reason = format!("protocol violation: {reason}");
        self.close(reason.clone());
        vec![TeleopMessage::Bye { reason }]
    }

    fn close(&mut self, reason: String) {
        if self.phase != Phase::Closed {
            self.phase = Phase::Closed;
            self.close_reason = Some(reason);
        }
    }

    /// Runs one command window. Returns `None` before the handshake and
    /// after the session has closed.
    pub fn advance(&mut self) -> Option<WindowOutput> {
        if self.phase != Phase::Running {
            return None;
        }
        let mut events = std::mem::take(&mut self.pending);
        events.extend(self.sim.apply_due_schedule());
        self.samples.push(Sample::capture(&self.sim, self.command, events));
        let events = run_window(&mut self.sim, &self.command, None);
        self.feedback_seq += 1;
        let plant = self.sim.plant();
        let feedback = TeleopMessage::Feedback {
            seq: self.feedback_seq,
            t: self.sim.time(),
            wrench: plant.measured_wrench,
            estop: self.sim.monitor().tripped,
        };
        let outcome = self.sim.status().outcome;
        let bye = outcome.is_terminal().then(|| {
            let reason = format!("scenario ended: {outcome}");
            self.close(reason.clone());
            TeleopMessage::Bye { reason }
        });
        self.pending = events.clone();
        Some(WindowOutput { feedback, frame: state_frame(&self.sim), events, bye })
    }

    /// Episode so far, ending with a snapshot of the current state.
    pub fn log(&self) -> EpisodeLog {
        let mut samples = self.samples.clone();
        samples.push(Sample::capture(&self.sim, self.command, self.pending.clone()));
        EpisodeLog::from_samples(self.header.clone(), &samples)
    }

    pub fn outcome(&self) -> Outcome {
        self.sim.status().outcome
    }
}

/// State frame for the simulation's current tick.
pub fn state_frame(sim: &Simulation) -> StateFrame {
    let plant = sim.plant();
    let status = sim.status();
    let kind = sim.config().kind;
    StateFrame {
        t: sim.time(),
        pose: plant.tcp_pose,
        deflection: plant.wrist_deflection,
        wrench: plant.measured_wrench,
        mode: sim.lock().mode,
        carrier_position: sim.lock().carrier_position,
        estop: sim.monitor().tripped,
        scenario: ScenarioSummary {
            outcome: status.outcome,
            insertion_depth: (kind == ScenarioKind::PegInHole).then_some(status.insertion_depth),
            handle_angle: (kind == ScenarioKind::DoorHandle).then_some(status.handle_angle),
            latch_released: status.latch_released,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lockstate::StiffnessMode;

    fn running() -> FollowerSession {
        let mut s = FollowerSession::new(ScenarioConfig::default_for(ScenarioKind::WallTouch), "t0").unwrap();
        assert_eq!(s.receive(TeleopMessage::hello(Role::Leader)), vec![TeleopMessage::hello(Role::Follower)]);
        s
    }

    fn cmd(seq: u64, t: f64, x: f64, mode: StiffnessMode) -> TeleopMessage {
        TeleopMessage::Command { seq, t, pose: Pose6 { x, ..Pose6::ZERO }, mode }
    }

    #[test]
    fn command_before_hello_closes() {
        let mut s = FollowerSession::new(ScenarioConfig::default_for(ScenarioKind::WallTouch), "t0").unwrap();
        let out = s.receive(cmd(1, 0.0, 1.0, StiffnessMode::Free));
        assert!(matches!(&out[..], [TeleopMessage::Bye { reason }] if reason.contains("before hello")));
        assert_eq!(s.phase(), Phase::Closed);
        assert!(s.advance().is_none());
    }

    #[test]
    fn wrong_version_closes() {
        let mut s = FollowerSession::new(ScenarioConfig::default_for(ScenarioKind::WallTouch), "t0").unwrap();
        let out = s.receive(TeleopMessage::Hello { spec_version: 9, role: Role::Leader });
        assert!(matches!(&out[..], [TeleopMessage::Bye { reason }] if reason.contains("version")));
    }

    #[test]
    fn stale_seq_is_dropped() {
        let mut s = running();
        s.receive(cmd(7, 0.0, 2.0, StiffnessMode::Free));
        let before = (s.command(), s.simulation().lever());
        assert!(s.receive(cmd(5, 0.0, 9.0, StiffnessMode::FullLock)).is_empty());
        assert!(s.receive(cmd(7, 0.0, 9.0, StiffnessMode::FullLock)).is_empty());
        assert_eq!((s.command(), s.simulation().lever()), before);
        assert_eq!(s.dropped(), 2);
    }

    #[test]
    fn time_going_backwards_is_a_violation() {
        let mut s = running();
        s.receive(cmd(1, 0.5, 0.0, StiffnessMode::Free));
        let out = s.receive(cmd(2, 0.4, 0.0, StiffnessMode::Free));
        assert!(matches!(&out[..], [TeleopMessage::Bye { .. }]));
    }

    #[test]
    fn feedback_every_window_on_the_grid() {
        let mut s = running();
        let mut last = 0.0;
        for k in 1..=50u64 {
            let out = s.advance().unwrap();
            let TeleopMessage::Feedback { seq, t, wrench, .. } = out.feedback else { panic!() };
            assert_eq!(seq, k);
            assert!((t - last - 0.02).abs() < 1e-9);
            assert_eq!(wrench, s.simulation().plant().measured_wrench);
            last = t;
        }
    }

    #[test]
    fn lever_reaches_full_lock_within_quarter_second() {
        let mut s = running();
        s.advance();
        let t0 = s.simulation().time();
        s.receive(cmd(1, t0, 0.0, StiffnessMode::FullLock));
        while s.simulation().lock().mode != StiffnessMode::FullLock {
            s.advance().unwrap();
        }
        assert!(s.simulation().time() - t0 <= 0.25 + 0.02 + 1e-9);
        let ticks = s.simulation().ticks() - (t0 / 0.002).round() as u64;
        assert!(ticks <= 130);
    }

    #[test]
    fn holds_last_command() {
        let mut s = running();
        s.receive(cmd(1, 0.0, 3.0, StiffnessMode::Free));
        for _ in 0..50 {
            s.advance();
        }
        assert_eq!(s.simulation().plant().commanded_pose.x, 3.0);
        assert!((s.simulation().plant().tcp_pose.x - 3.0).abs() < 1e-3);
    }

    #[test]
    fn log_replays_identically() {
        let mut s = running();
        for k in 0..200u64 {
            s.receive(cmd(k + 1, k as f64 * 0.02, (k as f64 * 0.2).min(25.0), StiffnessMode::Free));
            s.advance();
        }
        assert_eq!(s.outcome(), Outcome::Success);
        assert_eq!(s.phase(), Phase::Closed);
        let log = s.log();
        assert!(log.rows.len() > 100);
        let cfg = s.simulation().config().clone();
        let r = super::super::log::replay(&log, &cfg, None).unwrap();
        assert_eq!(r.log, log);
    }
}
