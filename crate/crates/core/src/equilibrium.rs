//! Quasi-static wrist equilibrium.
//!
//! The gripper sits at `tcp + δ` (translations; the wrist Z axis points from
//! the gripper toward the flange, so compression moves the gripper up).
//! Given the TCP and an environment model, find δ with
//! `F_env(tcp + δ) + R(δ) = 0`.

use crate::lockstate::StiffnessMode;
use crate::types::{Axis, Deflection6, Pose6, Wrench6};
use crate::wristmodel::WristModel;
use nalgebra::{Matrix3, Vector3};

const TRANSLATIONS: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
const MAX_ITER: usize = 60;
const FD_STEP: f64 = 1e-6;
/// Largest per-iteration change of any deflection component, mm. Keeps the
/// warm-started solve on the branch it started from instead of tunnelling
/// through thin penalty contacts.
const MAX_STEP: f64 = 0.25;
/// Residual force tolerance, N.
pub const FORCE_TOL: f64 = 1e-9;

/// Gripper pose for a TCP pose and wrist deflection.
pub fn gripper_pose(tcp: &Pose6, defl: &Deflection6) -> Pose6 {
    Pose6::from_array(std::array::from_fn(|i| tcp.to_array()[i] + defl.to_array()[i]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub deflection: Deflection6,
    /// Environment wrench on the gripper at equilibrium; the flange sees the same.
    pub contact: Wrench6,
    pub residual: f64,
    pub iterations: usize,
}

fn residual<F: Fn(&Pose6) -> Wrench6>(
    wrist: &WristModel,
    mode: StiffnessMode,
    tcp: &Pose6,
    env: &F,
    d: &Deflection6,
) -> (Vector3<f64>, Wrench6) {
    let w = env(&gripper_pose(tcp, d));
    let g = Vector3::from_fn(|i, _| {
        let a = TRANSLATIONS[i];
        w[a] + wrist.axis_reaction(a, d[a], mode)
    });
    (g, w)
}

/// Damped Newton on the translational deflection, warm-started from `guess`.
///
/// The environment Jacobian is taken by forward differences. Rotational axes
/// are solved one at a time against the environment torque at the
/// translational solution.
pub fn solve<F: Fn(&Pose6) -> Wrench6>(
    wrist: &WristModel,
    mode: StiffnessMode,
    tcp: &Pose6,
    env: F,
    guess: &Deflection6,
) -> Equilibrium {
    let mut d = *guess;
    let (mut g, mut w) = residual(wrist, mode, tcp, &env, &d);
    let mut iterations = 0;
    while iterations < MAX_ITER && g.amax() > FORCE_TOL {
        iterations += 1;
        let mut jac = Matrix3::zeros();
        for (j, &aj) in TRANSLATIONS.iter().enumerate() {
            let h = FD_STEP * (1.0 + d[aj].abs());
            let mut dp = d;
            dp[aj] += h;
            let (gp, _) = residual(wrist, mode, tcp, &env, &dp);
            for i in 0..3 {
                jac[(i, j)] = (gp[i] - g[i]) / h;
            }
        }
        let step = jac.lu().solve(&(-g)).unwrap_or_else(|| {
            Vector3::from_fn(|i, _| {
                let a = TRANSLATIONS[i];
                -g[i] / wrist.axis_slope(a, d[a], mode).min(-1e-9)
            })
        });
        let mut alpha = (MAX_STEP / step.amax()).min(1.0);
        let norm0 = g.norm();
        let mut improved = false;
        for _ in 0..40 {
            let mut trial = d;
            for (i, &a) in TRANSLATIONS.iter().enumerate() {
                trial[a] += alpha * step[i];
            }
            let (gt, wt) = residual(wrist, mode, tcp, &env, &trial);
            if gt.norm() < norm0 {
                d = trial;
                g = gt;
                w = wt;
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
    for a in [Axis::Roll, Axis::Pitch, Axis::Yaw] {
        d[a] = solve_axis(wrist, mode, a, -w[a], d[a]);
    }
    let w = env(&gripper_pose(tcp, &d));
    Equilibrium { deflection: d, contact: w, residual: g.amax(), iterations }
}

/// Deflection on one axis whose reaction balances `load`: R(δ) = −load.
fn solve_axis(wrist: &WristModel, mode: StiffnessMode, axis: Axis, load: f64, guess: f64) -> f64 {
    if load == 0.0 {
        return 0.0;
    }
    let mut x = guess;
    for _ in 0..MAX_ITER {
        let r = wrist.axis_reaction(axis, x, mode) + load;
        if r.abs() <= FORCE_TOL {
            break;
        }
        let s = wrist.axis_slope(axis, x, mode).min(-1e-12);
        x -= r / s;
    }
    x
}
