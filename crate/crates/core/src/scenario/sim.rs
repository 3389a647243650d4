//! Stepping one scenario: lock carrier, controller, wrist equilibrium,
//! contact and outcome bookkeeping.

use super::config::{Geometry, ScenarioConfig, ScenarioKind};
use super::script::start_pose;
use crate::contact::{door_contact_wrench, insertion_depth, peg_contact_wrench, wall_contact_wrench, HandleState};
use crate::controller::{check_estop, ControlError, ControlLaw, Controller, EStopMonitor, PlantState, INNER_DT};
use crate::equilibrium::{self, gripper_pose};
use crate::lockstate::{command_mode, LockState, StiffnessMode};
use crate::types::{Axis, Deflection6, Pose6, Wrench6};
use crate::wristmodel::{apply_envelope, WristModel};
use serde::{Deserialize, Serialize};
use std::fmt;

pub const TIMEOUT: f64 = 60.0;
/// Handle angle counted as returned, deg.
pub const RETURNED_ANGLE: f64 = 5.0;
/// Maximum grip force of the finger unit, N.
pub const MAX_GRIP_FORCE: f64 = 7.5;
/// Pad friction coefficient, two pads.
pub const PAD_FRICTION: f64 = 1.0;
/// Load in the pad plane beyond which a grasped peg slips in the fingers, N.
pub const SLIP_LOAD: f64 = 2.0 * PAD_FRICTION * MAX_GRIP_FORCE;

/// Load a grasped peg puts on the finger pads' friction. The pads squeeze
/// along Y, so Y loads press into a pad; pushing the peg up (+Z) is carried
/// by the palm stop. What remains is X and pull-out along −Z.
pub fn pad_shear(w: &Wrench6) -> f64 {
    w.fx.hypot(w.fz.min(0.0))
}
/// Wall contact counts as settled below this TCP speed, mm/s.
const SETTLED_SPEED: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    #[default]
    Running,
    Success,
    Estop,
    Timeout,
    /// The grasped part slipped in the fingers.
    Slip,
}

impl Outcome {
    pub fn is_terminal(self) -> bool {
        self != Outcome::Running
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Running => "running",
            Outcome::Success => "success",
            Outcome::Estop => "estop",
            Outcome::Timeout => "timeout",
            Outcome::Slip => "slip",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Outcome {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        [Outcome::Running, Outcome::Success, Outcome::Estop, Outcome::Timeout, Outcome::Slip]
            .into_iter()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| format!("unknown outcome '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ScenarioStatus {
    pub outcome: Outcome,
    /// mm.
    pub insertion_depth: f64,
    /// deg.
    pub handle_angle: f64,
    pub latch_released: bool,
    /// s.
    pub elapsed: f64,
}

/// Something that happened during a tick, labelled in episode logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioEvent {
    Lever(StiffnessMode),
    ModeEngaged(StiffnessMode),
    LatchReleased,
    HandleReleased,
    EStop(Axis),
    Slip,
    Success,
    Timeout,
}

impl fmt::Display for ScenarioEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioEvent::Lever(m) => write!(f, "lever:{m}"),
            ScenarioEvent::ModeEngaged(m) => write!(f, "mode:{m}"),
            ScenarioEvent::LatchReleased => f.write_str("latch_released"),
            ScenarioEvent::HandleReleased => f.write_str("handle_released"),
            ScenarioEvent::EStop(a) => write!(f, "estop:{}", a.wrench_label()),
            ScenarioEvent::Slip => f.write_str("slip"),
            ScenarioEvent::Success => f.write_str("success"),
            ScenarioEvent::Timeout => f.write_str("timeout"),
        }
    }
}

/// One running scenario. Deterministic: the same config and command stream
/// give bit-identical states.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: ScenarioConfig,
    wrist: WristModel,
    controller: Controller,
    plant: PlantState,
    lock: LockState,
    lever: StiffnessMode,
    status: ScenarioStatus,
    handle: HandleState,
    /// Unclamped solver deflection, used as the warm start.
    deflection: Deflection6,
    schedule_next: usize,
    ticks: u64,
    peak_force: f64,
    frozen: bool,
}


impl Simulation {
    pub fn new(config: ScenarioConfig) -> Result<Self, super::ConfigError> {
        Self::with_dt(config, INNER_DT)
    }

    pub fn with_dt(config: ScenarioConfig, dt: f64) -> Result<Self, super::ConfigError> {
        config.validate()?;
        let controller = Controller::new(config.gains, config.estop.monitor(), dt)
            .map_err(|e| super::ConfigError::new("gains", e.to_string()))?;
        let mode = config.initial_mode();
        let mut sim = Self {
            wrist: config.gripper.wrist(),
            plant: PlantState::at_rest(start_pose(&config)),
            controller,
            lock: LockState::seated(mode),
            lever: mode,
            status: ScenarioStatus::default(),
            handle: HandleState::default(),
            deflection: Deflection6::ZERO,
            schedule_next: 0,
            ticks: 0,
            peak_force: 0.0,
            frozen: false,
            config,
        };
        sim.solve_contact();
        Ok(sim)
    }

    pub fn with_control_law(mut self, law: ControlLaw) -> Self {
        self.controller = self.controller.with_law(law);
        self
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }
    pub fn plant(&self) -> &PlantState {
        &self.plant
    }
    pub fn lock(&self) -> &LockState {
        &self.lock
    }
    pub fn lever(&self) -> StiffnessMode {
        self.lever
    }
    pub fn status(&self) -> &ScenarioStatus {
        &self.status
    }
    pub fn handle(&self) -> &HandleState {
        &self.handle
    }
    pub fn monitor(&self) -> &EStopMonitor {
        &self.controller.monitor
    }
    pub fn dt(&self) -> f64 {
        self.controller.dt
    }
    pub fn ticks(&self) -> u64 {
        self.ticks
    }
    pub fn ticks_per_window(&self) -> u64 {
        self.controller.gate.ticks_per_window
    }
    /// Largest force magnitude seen at the flange so far, N.
    pub fn peak_force(&self) -> f64 {
        self.peak_force
    }
    pub fn time(&self) -> f64 {
        self.ticks as f64 * self.controller.dt
    }
    pub fn gripper_pose(&self) -> Pose6 {
        gripper_pose(&self.plant.tcp_pose, &self.deflection)
    }
    /// True once the arm has stopped for good (e-stop, slip or timeout).
    pub fn is_halted(&self) -> bool {
        self.frozen
    }

    /// Moves the stiffness lever; the carrier starts travelling on the next tick.
    pub fn set_lever(&mut self, mode: StiffnessMode) -> Option<ScenarioEvent> {
        if mode == self.lever {
            return None;
        }
        self.lever = mode;
        Some(ScenarioEvent::Lever(mode))
    }

    /// Moves the lever for every schedule entry due by now.
    pub fn apply_due_schedule(&mut self) -> Vec<ScenarioEvent> {
        let t = self.time();
        let mut events = Vec::new();
        while let Some(ev) = self.config.mode_schedule.get(self.schedule_next) {
            if ev.t > t + 1e-9 {
                break;
            }
            self.schedule_next += 1;
            events.extend(self.set_lever(ev.mode));
        }
        events
    }

    /// Drops the remaining mode schedule, for runs where the lever is driven externally.
    pub fn clear_schedule(&mut self) {
        self.schedule_next = self.config.mode_schedule.len();
    }

    fn contact(&self, gripper: &Pose6) -> Wrench6 {
        match &self.config.geometry {
            Geometry::Peg(g) => peg_contact_wrench(gripper, g),
            Geometry::Door(g) => door_contact_wrench(gripper, g, &self.handle),
            Geometry::Wall(g) => wall_contact_wrench(gripper, g),
        }
    }

    fn solve_contact(&mut self) {
        let mode = self.lock.mode;
        let eq = equilibrium::solve(&self.wrist, mode, &self.plant.tcp_pose, |g| self.contact(g), &self.deflection);
        self.deflection = eq.deflection;
        self.plant.wrist_deflection = match self.wrist.envelope() {
            Some(env) => apply_envelope(&eq.deflection, mode, env).0,
            None => eq.deflection,
        };
        self.plant.measured_wrench = eq.contact;
        self.peak_force = self.peak_force.max(eq.contact.force_norm());
    }

    /// Torque the gripper applies to the handle about its hinge, N·m.
    fn grip_torque(&self) -> f64 {
        let Some(door) = self.config.door() else { return 0.0 };
        let r = self.wrist.reaction(&self.deflection, self.lock.mode);
        door.torque_about_hinge(&self.gripper_pose(), r.fx, r.fy)
    }

    fn finish(&mut self, outcome: Outcome, events: &mut Vec<ScenarioEvent>) {
        if !self.status.outcome.is_terminal() {
            self.status.outcome = outcome;
        }
        if outcome != Outcome::Success {
            self.frozen = true;
        }
        events.push(match outcome {
            Outcome::Success => ScenarioEvent::Success,
            Outcome::Timeout => ScenarioEvent::Timeout,
            Outcome::Slip => ScenarioEvent::Slip,
            Outcome::Estop => ScenarioEvent::EStop(self.controller.monitor.trip_axis.unwrap_or(Axis::X)),
            Outcome::Running => unreachable!("finish with running"),
        });
    }

    /// One inner tick toward `command`. The command passes through the
    /// 50 Hz gate; schedule entries take effect at window boundaries.
    ///
    /// After success the physics keeps running so an episode can be recorded
    /// to its end; e-stop, slip and timeout halt the arm.
    pub fn step(&mut self, command: &Pose6) -> Vec<ScenarioEvent> {
        let mut events = Vec::new();
        if self.frozen {
            return events;
        }
        let dt = self.controller.dt;
        if self.controller.gate.at_boundary() {
            events.extend(self.apply_due_schedule());
        }

        let before = self.lock.mode;
        self.lock = command_mode(&self.lock, self.lever, dt);
        if self.lock.mode != before {
            events.push(ScenarioEvent::ModeEngaged(self.lock.mode));
        }

        if let Some(door) = self.config.door() {
            if self.handle.grasped
                && self.handle.latch_released
                && self.lock.mode == StiffnessMode::Free
                && self.grip_torque().abs() < door.release_threshold
            {
                self.handle.grasped = false;
                events.push(ScenarioEvent::HandleReleased);
            }
        }

        self.controller.set_command(*command);
        match self.controller.step(&self.plant) {
            Ok(next) => self.plant = next,
            Err(ControlError::EStopTripped { .. }) => {
                self.finish(Outcome::Estop, &mut events);
                return events;
            }
            Err(e) => unreachable!("validated controller failed: {e}"),
        }
        self.ticks += 1;
        self.status.elapsed = self.time();

        if let Some(door) = self.config.door().copied() {
            if !self.handle.grasped {
                self.handle.angle *= (-dt / door.return_time_constant).exp();
            }
        }
        self.solve_contact();
        let gripper = self.gripper_pose();
        match self.config.kind {
            ScenarioKind::PegInHole => self.status.insertion_depth = insertion_depth(&gripper),
            ScenarioKind::DoorHandle => {
                let door = *self.config.door().expect("door geometry");
                if self.handle.grasped {
                    self.handle.angle = door.angle_at(&gripper);
                }
                if !self.handle.latch_released && self.handle.angle >= door.latch_angle {
                    self.handle.latch_released = true;
                    events.push(ScenarioEvent::LatchReleased);
                }
                self.status.handle_angle = self.handle.angle;
                self.status.latch_released = self.handle.latch_released;
            }
            ScenarioKind::WallTouch => {}
        }

        self.controller.monitor = check_estop(&self.controller.monitor, &self.plant.measured_wrench);
        if self.controller.monitor.tripped {
            self.finish(Outcome::Estop, &mut events);
            return events;
        }
        if self.status.outcome.is_terminal() {
            return events;
        }
        if self.config.kind == ScenarioKind::PegInHole && pad_shear(&self.plant.measured_wrench) > SLIP_LOAD {
            self.finish(Outcome::Slip, &mut events);
        } else if self.succeeded() {
            self.finish(Outcome::Success, &mut events);
        } else if self.status.elapsed >= TIMEOUT - 1e-9 {
            self.finish(Outcome::Timeout, &mut events);
        }
        events
    }

    fn succeeded(&self) -> bool {
        match &self.config.geometry {
            Geometry::Peg(p) => self.status.insertion_depth >= p.hole_depth,
            Geometry::Door(_) => self.handle.latch_released && self.handle.angle <= RETURNED_ANGLE,
            Geometry::Wall(w) => {
                self.plant.commanded_pose.x >= w.wall_distance + w.overshoot
                    && self.plant.tcp_velocity.x.abs() < SETTLED_SPEED
            }
        }
    }
}
