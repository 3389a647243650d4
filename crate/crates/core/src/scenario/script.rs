//! Scripted operator trajectories and the window-by-window run harness.

use super::config::{Geometry, ScenarioConfig};
use super::sim::{Outcome, ScenarioEvent, ScenarioStatus, Simulation};
use crate::contact::{DoorGeometry, PegGeometry, WallGeometry};
use crate::controller::{ControlLaw, PlantState, COMMAND_PERIOD};
use crate::lockstate::StiffnessMode;
use crate::types::Pose6;

/// Peg tip height above the hole face at the start, mm.
pub const APPROACH_HEIGHT: f64 = 5.0;
/// mm/s.
pub const INSERTION_SPEED: f64 = 10.0;
/// Commanded travel past the hole depth, mm.
pub const OVERDRIVE: f64 = 2.0;
/// deg.
pub const DOOR_SWEEP: f64 = 55.0;
/// deg/s.
pub const DOOR_RATE: f64 = 20.0;
/// Pull along +Z that swings the unlatched door open, mm.
pub const DOOR_PULL: f64 = 20.0;
/// s.
pub const DOOR_PULL_TIME: f64 = 1.0;
pub const DOOR_RETRACT: f64 = 3.0;
/// mm/s.
pub const WALL_SPEED: f64 = 10.0;

/// Straight-line scripted command trajectory for a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Script {
    /// Straight down from above the hole.
    Peg { offset: Pose6, start_z: f64, end_z: f64 },
    /// Turn the handle out to `DOOR_SWEEP`, pull the door open, turn the handle back.
    Door { offset: Pose6, door: DoorGeometry },
    /// Approach along +X to past the wall.
    Wall { offset: Pose6, end_x: f64 },
}

impl Script {
    pub fn for_config(cfg: &ScenarioConfig) -> Self {
        let offset = cfg.initial_misalignment;
        match &cfg.geometry {
            Geometry::Peg(p) => peg_script(offset, p),
            Geometry::Door(d) => Script::Door { offset, door: *d },
            Geometry::Wall(w) => wall_script(offset, w),
        }
    }

    /// Time at which the trajectory stops moving, s.
    pub fn duration(&self) -> f64 {
        match *self {
            Script::Peg { start_z, end_z, .. } => (start_z - end_z) / INSERTION_SPEED,
            Script::Door { .. } => DOOR_SWEEP / DOOR_RATE + DOOR_PULL_TIME + DOOR_RETRACT,
            Script::Wall { end_x, .. } => end_x / WALL_SPEED,
        }
    }

    /// Handle angle commanded at `t`, deg.
    pub fn door_angle(t: f64) -> f64 {
        let out = DOOR_SWEEP / DOOR_RATE;
        if t <= out {
            DOOR_RATE * t
        } else if t <= out + DOOR_PULL_TIME {
            DOOR_SWEEP
        } else {
            let s = ((t - out - DOOR_PULL_TIME) / DOOR_RETRACT).min(1.0);
            DOOR_SWEEP * (1.0 - s)
        }
    }

    /// Door pull commanded at `t`, mm.
    pub fn door_pull(t: f64) -> f64 {
        let s = ((t - DOOR_SWEEP / DOOR_RATE) / DOOR_PULL_TIME).clamp(0.0, 1.0);
        DOOR_PULL * s
    }

    pub fn command(&self, t: f64) -> Pose6 {
        let t = t.max(0.0);
        match *self {
            Script::Peg { offset, start_z, end_z } => {
                let z = (start_z - INSERTION_SPEED * t).max(end_z);
                Pose6 { z: offset.z + z, ..offset }
            }
            Script::Door { offset, door } => {
                let (x, y) = door.grasp_point(Self::door_angle(t));
                Pose6 { x: offset.x + x, y: offset.y + y, z: offset.z + Self::door_pull(t), ..offset }
            }
            Script::Wall { offset, end_x } => {
                let x = (WALL_SPEED * t).min(end_x);
                Pose6 { x: offset.x + x, ..offset }
            }
        }
    }
}

fn peg_script(offset: Pose6, p: &PegGeometry) -> Script {
    Script::Peg { offset, start_z: APPROACH_HEIGHT, end_z: -(p.hole_depth + OVERDRIVE) }
}

fn wall_script(offset: Pose6, w: &WallGeometry) -> Script {
    Script::Wall { offset, end_x: w.wall_distance + w.overshoot }
}

/// Where the TCP starts: the first scripted pose.
pub fn start_pose(cfg: &ScenarioConfig) -> Pose6 {
    Script::for_config(cfg).command(0.0)
}

/// How the scripted operator handles the stiffness lever.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LeverPolicy {
    /// Only the config's mode schedule moves the lever.
    #[default]
    Schedule,
    /// Flip the lever to free as soon as the latch releases.
    FreeOnLatch,
}

/// State at the start of one 20 ms command window.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub command: Pose6,
    pub lever: StiffnessMode,
    /// Mode actually engaged by the lock.
    pub mode: StiffnessMode,
    pub carrier_position: f64,
    pub plant: PlantState,
    pub status: ScenarioStatus,
    pub estop: bool,
    /// Events since the previous sample.
    pub events: Vec<ScenarioEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub status: ScenarioStatus,
    pub peak_force: f64,
    pub samples: Vec<Sample>,
}

impl Sample {
    /// Snapshot of `sim` at the start of a window that will run `command`.
    pub fn capture(sim: &Simulation, command: Pose6, events: Vec<ScenarioEvent>) -> Sample {
        Sample {
            t: sim.time(),
            command,
            lever: sim.lever(),
            mode: sim.lock().mode,
            carrier_position: sim.lock().carrier_position,
            plant: *sim.plant(),
            status: *sim.status(),
            estop: sim.monitor().tripped,
            events,
        }
    }
}

/// Runs one command window: lever first, then the window's inner ticks.
pub fn run_window(sim: &mut Simulation, command: &Pose6, lever: Option<StiffnessMode>) -> Vec<ScenarioEvent> {
    let mut events: Vec<ScenarioEvent> = lever.and_then(|m| sim.set_lever(m)).into_iter().collect();
    for _ in 0..sim.ticks_per_window() {
        events.extend(sim.step(command));
        if sim.is_halted() {
            break;
        }
    }
    events
}

/// Drives a simulation window by window from `next`, which returns the
/// command and an optional lever position for window `k`, or `None` when the
/// source is exhausted. Stops when the arm halts, after `limit` samples, or
/// when the source is exhausted and the outcome is terminal. An exhausted
/// source holds its last command, so unfinished runs end at the timeout.
fn drive<F>(mut sim: Simulation, settle_after: f64, stop_on_success: bool, limit: Option<usize>, mut next: F) -> RunResult
where
    F: FnMut(usize, &Simulation) -> Option<(Pose6, Option<StiffnessMode>)>,
{
    let mut samples = Vec::new();
    let mut pending = Vec::new();
    let mut last_command = sim.plant().commanded_pose;
    let mut k = 0usize;
    loop {
        let step = next(k, &sim);
        let (command, lever) = step.unwrap_or((last_command, None));
        let mut events = std::mem::take(&mut pending);
        if !sim.is_halted() {
            events.extend(sim.apply_due_schedule());
            events.extend(lever.and_then(|m| sim.set_lever(m)));
        }
        samples.push(Sample::capture(&sim, command, events));
        if sim.is_halted() || (stop_on_success && sim.status().outcome == Outcome::Success) {
            break;
        }
        if limit.is_some_and(|n| samples.len() >= n) {
            break;
        }
        if step.is_none() && sim.time() >= settle_after && sim.status().outcome.is_terminal() {
            break;
        }
        pending = run_window(&mut sim, &command, None);
        last_command = command;
        k += 1;
    }
    let status = *sim.status();
    RunResult { status, peak_force: sim.peak_force(), samples }
}

/// Runs the config's scripted trajectory to an outcome.
///
/// Peg runs stop at success. Door and wall runs continue to the end of the
/// trajectory so the episode is complete.
pub fn run_scripted(cfg: &ScenarioConfig, policy: LeverPolicy) -> Result<RunResult, super::ConfigError> {
    run_scripted_with(cfg, policy, None, ControlLaw::Admittance)
}

pub fn run_scripted_with(
    cfg: &ScenarioConfig,
    policy: LeverPolicy,
    dt: Option<f64>,
    law: ControlLaw,
) -> Result<RunResult, super::ConfigError> {
    let sim = match dt {
        Some(dt) => Simulation::with_dt(cfg.clone(), dt)?,
        None => Simulation::new(cfg.clone())?,
    }
    .with_control_law(law);
    let script = Script::for_config(cfg);
    let end = script.duration();
    let stop_on_success = matches!(script, Script::Peg { .. });
    Ok(drive(sim, end, stop_on_success, None, |k, sim| {
        let t = k as f64 * COMMAND_PERIOD;
        if t > end + COMMAND_PERIOD * 0.5 {
            return None;
        }
        let lever = match policy {
            LeverPolicy::FreeOnLatch if sim.status().latch_released => Some(StiffnessMode::Free),
            _ => None,
        };
        Some((script.command(t), lever))
    }))
}

/// Replays a fixed command stream, one entry per 20 ms window, recording one
/// sample per entry. A `Some` lever in an entry moves the lever at that
/// window; the config's schedule is ignored. An empty stream gives no samples.
pub fn run_commands(
    cfg: &ScenarioConfig,
    windows: &[(Pose6, Option<StiffnessMode>)],
) -> Result<RunResult, super::ConfigError> {
    let mut sim = Simulation::new(cfg.clone())?;
    sim.clear_schedule();
    if windows.is_empty() {
        return Ok(RunResult { status: *sim.status(), peak_force: sim.peak_force(), samples: Vec::new() });
    }
    let end = windows.len() as f64 * COMMAND_PERIOD;
    Ok(drive(sim, end, false, Some(windows.len()), |k, _| windows.get(k).copied()))
}
