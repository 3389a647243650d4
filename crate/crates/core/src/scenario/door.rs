//! The door-handle replay triad: one recorded variable-stiffness episode
//! replayed with the lever pinned to free, pinned to full lock, and as recorded.

use super::config::{ModeEvent, ScenarioConfig};
use super::script::{run_commands, run_scripted, LeverPolicy, RunResult, Sample};
use super::ConfigError;
use crate::lockstate::StiffnessMode;
use crate::types::Pose6;

/// Window over which post-release force is averaged, s.
pub const POST_RELEASE_WINDOW: f64 = 2.0;
/// Window after the mode switch in which the force drop is measured, s.
pub const DROP_WINDOW: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DoorMetrics {
    pub latch_time: Option<f64>,
    /// First sample at which the lock has left full lock for free.
    pub switch_time: Option<f64>,
    /// Mean flange force magnitude over the post-release window, N.
    pub post_release_mean: Option<f64>,
    /// 1 − (min force within the drop window) / (force just before the switch).
    pub drop_fraction: Option<f64>,
}

pub fn door_metrics(samples: &[Sample]) -> DoorMetrics {
    let force = |s: &Sample| s.plant.measured_wrench.force_norm();
    let latch_time = samples.iter().find(|s| s.status.latch_released).map(|s| s.t);
    let post_release_mean = latch_time.and_then(|t0| {
        let w: Vec<f64> =
            samples.iter().filter(|s| s.t >= t0 && s.t <= t0 + POST_RELEASE_WINDOW + 1e-9).map(force).collect();
        (!w.is_empty()).then(|| w.iter().sum::<f64>() / w.len() as f64)
    });
    let switch = samples
        .windows(2)
        .position(|w| w[0].mode == StiffnessMode::FullLock && w[1].mode == StiffnessMode::Free)
        .map(|i| i + 1);
    let switch_time = switch.map(|i| samples[i].t);
    let drop_fraction = switch.map(|i| {
        let before = force(&samples[i - 1]);
        let t0 = samples[i].t;
        let min = samples[i..].iter().take_while(|s| s.t <= t0 + DROP_WINDOW + 1e-9).map(force).fold(f64::INFINITY, f64::min);
        if before > 0.0 {
            1.0 - min / before
        } else {
            0.0
        }
    });
    DoorMetrics { latch_time, switch_time, post_release_mean, drop_fraction }
}

#[derive(Debug, Clone)]
pub struct DoorTriad {
    pub recorded: RunResult,
    pub free: RunResult,
    pub full: RunResult,
    pub variable: RunResult,
}

impl DoorTriad {
    pub fn metrics(&self) -> [DoorMetrics; 3] {
        [door_metrics(&self.free.samples), door_metrics(&self.full.samples), door_metrics(&self.variable.samples)]
    }
}

/// Records the scripted variable-stiffness episode (full lock until the
/// latch releases, then free) and replays its pose stream three ways.
pub fn door_triad(cfg: &ScenarioConfig) -> Result<DoorTriad, ConfigError> {
    let mut rec_cfg = cfg.clone();
    rec_cfg.mode_schedule = vec![ModeEvent { t: 0.0, mode: StiffnessMode::FullLock }];
    let recorded = run_scripted(&rec_cfg, LeverPolicy::FreeOnLatch)?;
    let poses: Vec<Pose6> = recorded.samples.iter().map(|s| s.command).collect();
    let pinned = |mode: StiffnessMode| -> Result<RunResult, ConfigError> {
        let mut c = cfg.clone();
        c.mode_schedule = vec![ModeEvent { t: 0.0, mode }];
        let w: Vec<_> = poses.iter().map(|p| (*p, Some(mode))).collect();
        run_commands(&c, &w)
    };
    let free = pinned(StiffnessMode::Free)?;
    let full = pinned(StiffnessMode::FullLock)?;
    let w: Vec<_> = recorded.samples.iter().map(|s| (s.command, Some(s.lever))).collect();
    let variable = run_commands(&rec_cfg, &w)?;
    Ok(DoorTriad { recorded, free, full, variable })
}
