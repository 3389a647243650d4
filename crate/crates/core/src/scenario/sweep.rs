//! Misalignment sweeps over peg-in-hole scenarios.

use super::config::{GripperKind, ScenarioConfig};
use super::script::{run_scripted, LeverPolicy};
use super::sim::Outcome;
use super::ConfigError;
use crate::types::Pose6;
use rayon::prelude::*;
use std::fmt::Write;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub offset_x: f64,
    pub offset_y: f64,
    pub gripper: GripperKind,
    pub outcome: Outcome,
    pub depth: f64,
    pub peak_force: f64,
    pub elapsed: f64,
}

pub const RESULTS_HEADER: &str = "offset_x_mm,offset_y_mm,gripper,outcome,depth_mm,peak_force_N,elapsed_s";

/// Offsets along each lateral axis separately, both signs, `0..=max` in `step`.
pub fn axis_offsets(max: f64, step: f64) -> Vec<(f64, f64)> {
    let n = (max / step + 1e-9).floor() as i64;
    let mut out = vec![(0.0, 0.0)];
    for i in 1..=n {
        let v = i as f64 * step;
        out.extend([(v, 0.0), (-v, 0.0), (0.0, v), (0.0, -v)]);
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    out
}

/// Runs the scripted straight-down insertion once per offset. Offsets are
/// added to the config's initial misalignment. Runs are independent and
/// executed in parallel; results come back sorted by offset.
pub fn misalignment_sweep(
    cfg: &ScenarioConfig,
    gripper: GripperKind,
    offsets: &[(f64, f64)],
) -> Result<Vec<SweepPoint>, ConfigError> {
    let mut base = cfg.clone();
    base.gripper = gripper;
    base.validate()?;
    let mut points = offsets
        .par_iter()
        .map(|&(ox, oy)| {
            let mut c = base.clone();
            c.initial_misalignment = Pose6 { x: c.initial_misalignment.x + ox, y: c.initial_misalignment.y + oy, ..c.initial_misalignment };
            let r = run_scripted(&c, LeverPolicy::Schedule)?;
            Ok(SweepPoint {
                offset_x: ox,
                offset_y: oy,
                gripper,
                outcome: r.status.outcome,
                depth: r.status.insertion_depth,
                peak_force: r.peak_force,
                elapsed: r.status.elapsed,
            })
        })
        .collect::<Result<Vec<_>, ConfigError>>()?;
    points.sort_by(|a, b| a.offset_x.total_cmp(&b.offset_x).then(a.offset_y.total_cmp(&b.offset_y)));
    Ok(points)
}

/// Largest |offset| along X (or Y) that still succeeds, among points on that axis.
pub fn tolerance(points: &[SweepPoint], along_y: bool) -> f64 {
    points
        .iter()
        .filter(|p| p.outcome == Outcome::Success)
        .filter(|p| if along_y { p.offset_x == 0.0 } else { p.offset_y == 0.0 })
        .map(|p| if along_y { p.offset_y.abs() } else { p.offset_x.abs() })
        .fold(0.0, f64::max)
}

pub fn results_csv(points: &[SweepPoint]) -> String {
    let mut s = String::from(RESULTS_HEADER);
    s.push('\n');
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            p.offset_x, p.offset_y, p.gripper, p.outcome, p.depth, p.peak_force, p.elapsed
        );
    }
    s
}
