//! Admittance controller driving a simulated position-controlled arm.
//!
//! Every Cartesian axis of the tool center point behaves as a virtual
//! mass-damper-spring pulled toward the commanded pose and pushed by the
//! wrench measured at the flange. The inner loop runs at 500 Hz; pose
//! commands are taken at most once per 20 ms window.

use crate::types::{Axis, Deflection6, Pose6, Wrench6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Inner control period in seconds (500 Hz).
pub const INNER_DT: f64 = 0.002;
/// Command window in seconds (50 Hz).
pub const COMMAND_PERIOD: f64 = 0.02;
/// Minimum damping ratio accepted for any axis.
pub const MIN_DAMPING_RATIO: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("emergency stop tripped on {axis} ({value:.3} exceeds {threshold})")]
    EStopTripped { axis: Axis, value: f64, threshold: f64 },
    #[error("invalid gains: {0}")]
    InvalidGains(String),
    #[error("invalid time step {0}")]
    InvalidStep(f64),
}

/// Per-axis admittance parameters, indexed x, y, z, roll, pitch, yaw.
///
/// Translational entries are kg, N·s/m and N/m; rotational entries are
/// kg·m², N·m·s/rad and N·m/rad.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerGains {
    pub virtual_mass: [f64; 6],
    pub virtual_damping: [f64; 6],
    pub stiffness_to_target: [f64; 6],
    /// Force components below this magnitude are ignored, N (N·m on torques).
    pub force_deadband: f64,
}

impl Default for ControllerGains {
    /// Stiff tracking tuned to ζ = 0.9 on every axis. Not measured values.
    fn default() -> Self {
        let (m, k) = (2.0, 50_000.0);
        let (i, kr) = (0.02, 100.0);
        let zeta = 0.9;
        let b = 2.0 * zeta * (k * m as f64).sqrt();
        let br = 2.0 * zeta * (kr * i as f64).sqrt();
        Self {
            virtual_mass: [m, m, m, i, i, i],
            virtual_damping: [b, b, b, br, br, br],
            stiffness_to_target: [k, k, k, kr, kr, kr],
            force_deadband: 0.05,
        }
    }
}

impl ControllerGains {
    pub fn damping_ratio(&self, axis: Axis) -> f64 {
        let i = axis.index();
        self.virtual_damping[i] / (2.0 * (self.stiffness_to_target[i] * self.virtual_mass[i]).sqrt())
    }

    /// Natural frequency of one axis, rad/s.
    pub fn natural_frequency(&self, axis: Axis) -> f64 {
        let i = axis.index();
        (self.stiffness_to_target[i] / self.virtual_mass[i]).sqrt()
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        for axis in Axis::ALL {
            let i = axis.index();
            for (name, v) in [
                ("virtual_mass", self.virtual_mass[i]),
                ("virtual_damping", self.virtual_damping[i]),
                ("stiffness_to_target", self.stiffness_to_target[i]),
            ] {
                if !(v.is_finite() && v > 0.0) {
                    return Err(ControlError::InvalidGains(format!("{name}[{axis}] must be positive, got {v}")));
                }
            }
            let zeta = self.damping_ratio(axis);
            if zeta < MIN_DAMPING_RATIO {
                return Err(ControlError::InvalidGains(format!(
                    "damping ratio on {axis} is {zeta:.3}, below {MIN_DAMPING_RATIO}"
                )));
            }
        }
        if !(self.force_deadband.is_finite() && self.force_deadband >= 0.0) {
            return Err(ControlError::InvalidGains("force_deadband must be non-negative".into()));
        }
        Ok(())
    }
}

/// Simulated arm and wrist state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlantState {
    /// TCP pose in the world frame (mm, deg).
    pub tcp_pose: Pose6,
    /// mm/s and deg/s.
    pub tcp_velocity: Pose6,
    pub commanded_pose: Pose6,
    /// Wrist deflection after envelope clamping.
    pub wrist_deflection: Deflection6,
    /// Wrench seen by the flange sensor.
    pub measured_wrench: Wrench6,
}

impl PlantState {
    /// At rest at `pose`, commanded to stay there.
    pub fn at_rest(pose: Pose6) -> Self {
        Self { tcp_pose: pose, commanded_pose: pose, ..Self::default() }
    }

    pub fn is_finite(&self) -> bool {
        self.tcp_pose.is_finite()
            && self.tcp_velocity.is_finite()
            && self.commanded_pose.is_finite()
            && self.wrist_deflection.is_finite()
            && self.measured_wrench.is_finite()
    }

    /// Kinetic plus virtual-spring energy of the admittance, J.
    pub fn virtual_energy(&self, gains: &ControllerGains) -> f64 {
        Axis::ALL
            .iter()
            .map(|&a| {
                let i = a.index();
                let s = unit_scale(a);
                let v = self.tcp_velocity[a] * s;
                let e = (self.commanded_pose[a] - self.tcp_pose[a]) * s;
                0.5 * gains.virtual_mass[i] * v * v + 0.5 * gains.stiffness_to_target[i] * e * e
            })
            .sum()
    }
}

// mm -> m, deg -> rad
fn unit_scale(axis: Axis) -> f64 {
    if axis.is_rotation() {
        std::f64::consts::PI / 180.0
    } else {
        1e-3
    }
}

/// One semi-implicit Euler step of the admittance law.
///
/// mass·accel = wrench − damping·vel + stiffness·(commanded − pose), per axis.
/// Pure and deterministic: identical inputs give bit-identical outputs.
pub fn step_controller(state: &PlantState, gains: &ControllerGains, external: &Wrench6, dt: f64) -> PlantState {
    let mut next = *state;
    for axis in Axis::ALL {
        let i = axis.index();
        let s = unit_scale(axis);
        let f = external[axis];
        let f = if f.abs() < gains.force_deadband { 0.0 } else { f };
        let v = state.tcp_velocity[axis] * s;
        let e = (state.commanded_pose[axis] - state.tcp_pose[axis]) * s;
        let accel = (f - gains.virtual_damping[i] * v + gains.stiffness_to_target[i] * e) / gains.virtual_mass[i];
        let v_next = v + accel * dt;
        next.tcp_velocity[axis] = v_next / s;
        next.tcp_pose[axis] = state.tcp_pose[axis] + v_next / s * dt;
    }
    next
}

/// Latching protective stop on any wrench component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EStopMonitor {
    pub force_threshold: f64,
    pub torque_threshold: f64,
    pub tripped: bool,
    pub trip_axis: Option<Axis>,
}

impl Default for EStopMonitor {
    /// 50 N / 10 N·m: typical collaborative-arm protective-stop levels.
    fn default() -> Self {
        Self::new(50.0, 10.0)
    }
}

impl EStopMonitor {
    pub fn new(force_threshold: f64, torque_threshold: f64) -> Self {
        Self { force_threshold, torque_threshold, tripped: false, trip_axis: None }
    }

    pub fn reset(&mut self) {
        self.tripped = false;
        self.trip_axis = None;
    }

    pub fn threshold(&self, axis: Axis) -> f64 {
        if axis.is_rotation() {
            self.torque_threshold
        } else {
            self.force_threshold
        }
    }
}

/// Trips if any component exceeds its threshold; the first offending axis is kept.
pub fn check_estop(monitor: &EStopMonitor, wrench: &Wrench6) -> EStopMonitor {
    let mut next = *monitor;
    if next.tripped {
        return next;
    }
    if let Some(axis) = Axis::ALL.into_iter().find(|&a| wrench[a].abs() > monitor.threshold(a)) {
        next.tripped = true;
        next.trip_axis = Some(axis);
    }
    next
}

/// Holds pose commands until the next 20 ms boundary; the last command
/// submitted within a window wins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandGate {
    pub ticks_per_window: u64,
    pub tick: u64,
    pub pending: Option<Pose6>,
}

impl CommandGate {
    pub fn new(dt: f64) -> Self {
        let ticks = (COMMAND_PERIOD / dt).round().max(1.0) as u64;
        Self { ticks_per_window: ticks, tick: 0, pending: None }
    }

    pub fn submit(&mut self, pose: Pose6) {
        self.pending = Some(pose);
    }

    pub fn at_boundary(&self) -> bool {
        self.tick % self.ticks_per_window == 0
    }

    /// Applies a pending command if this tick opens a window, then advances.
    pub fn tick(&mut self, state: &mut PlantState) -> bool {
        let mut applied = false;
        if self.at_boundary() {
            if let Some(p) = self.pending.take() {
                applied = state.commanded_pose != p;
                state.commanded_pose = p;
            }
        }
        self.tick += 1;
        applied
    }
}

/// How the arm follows its command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ControlLaw {
    #[default]
    Admittance,
    /// The limit of infinite target stiffness: the TCP is the command.
    PositionTracking,
}

/// Gains, e-stop monitor and command gate of one simulation session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Controller {
    pub gains: ControllerGains,
    pub monitor: EStopMonitor,
    pub gate: CommandGate,
    pub law: ControlLaw,
    pub dt: f64,
}

impl Controller {
    pub fn new(gains: ControllerGains, monitor: EStopMonitor, dt: f64) -> Result<Self, ControlError> {
        gains.validate()?;
        if !(dt > 0.0 && dt <= 0.01) {
            return Err(ControlError::InvalidStep(dt));
        }
        Ok(Self { gains, monitor, gate: CommandGate::new(dt), law: ControlLaw::Admittance, dt })
    }

    pub fn with_law(mut self, law: ControlLaw) -> Self {
        self.law = law;
        self
    }

    /// Queues a pose command; it takes effect at the next window boundary.
    pub fn set_command(&mut self, pose: Pose6) {
        self.gate.submit(pose);
    }

    /// One inner tick: e-stop check on the measured wrench, command gate,
    /// then integration.
    pub fn step(&mut self, state: &PlantState) -> Result<PlantState, ControlError> {
        self.monitor = check_estop(&self.monitor, &state.measured_wrench);
        if self.monitor.tripped {
            let axis = self.monitor.trip_axis.unwrap_or(Axis::X);
            return Err(ControlError::EStopTripped {
                axis,
                value: state.measured_wrench[axis],
                threshold: self.monitor.threshold(axis),
            });
        }
        let mut s = *state;
        self.gate.tick(&mut s);
        Ok(match self.law {
            ControlLaw::Admittance => step_controller(&s, &self.gains, &s.measured_wrench, self.dt),
            ControlLaw::PositionTracking => {
                let mut next = s;
                next.tcp_velocity = (s.commanded_pose - s.tcp_pose).map(|v| v / self.dt);
                next.tcp_pose = s.commanded_pose;
                next
            }
        })
    }
}
