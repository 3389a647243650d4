//! Anisotropic 6-DoF compliance of the wrist.
//!
//! Each axis is an independent cubic-stiffening spring, F = −(k1·δ + k3·δ³),
//! with one coefficient pair per stiffness mode. Z uses separate pairs for
//! compression and extension. Cross-axis coupling is zero: only per-axis
//! force curves exist to fit against.
//!
//! Forces come out in newtons for millimeter deflections and torques in
//! newton-meters for degree deflections. Past the deformation envelope a
//! linear barrier with slope `barrier_gain` is added on top of the polynomial.

use crate::lockstate::StiffnessMode;
use crate::types::{Axis, Deflection6, Wrench6};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WristError {
    #[error("inconsistent calibration anchors: {0}")]
    InconsistentAnchors(String),
    #[error("infeasible calibration: anchor {anchor} misses its target by {error_pct:.2}%")]
    InfeasibleCalibration { anchor: String, error_pct: f64 },
    #[error("invalid stiffness parameters: {0}")]
    InvalidParams(String),
}

/// Spring channels; Z splits into compression and extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpringAxis {
    X,
    Y,
    ZComp,
    ZExt,
    Roll,
    Pitch,
    Yaw,
}

impl SpringAxis {
    pub const ALL: [SpringAxis; 7] = [
        SpringAxis::X,
        SpringAxis::Y,
        SpringAxis::ZComp,
        SpringAxis::ZExt,
        SpringAxis::Roll,
        SpringAxis::Pitch,
        SpringAxis::Yaw,
    ];

    /// Channel that handles deflection `value` on `axis`.
    pub fn for_deflection(axis: Axis, value: f64) -> Self {
        match axis {
            Axis::X => SpringAxis::X,
            Axis::Y => SpringAxis::Y,
            Axis::Z if value < 0.0 => SpringAxis::ZExt,
            Axis::Z => SpringAxis::ZComp,
            Axis::Roll => SpringAxis::Roll,
            Axis::Pitch => SpringAxis::Pitch,
            Axis::Yaw => SpringAxis::Yaw,
        }
    }

    pub fn is_rotation(self) -> bool {
        matches!(self, SpringAxis::Roll | SpringAxis::Pitch | SpringAxis::Yaw)
    }
}

/// Linear and cubic coefficient of one spring channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpringCoeffs {
    pub k1: f64,
    pub k3: f64,
}

impl SpringCoeffs {
    pub const fn new(k1: f64, k3: f64) -> Self {
        Self { k1, k3 }
    }

    /// Magnitude of the restoring force at |δ| = `mag`.
    pub fn force(&self, mag: f64) -> f64 {
        self.k1 * mag + self.k3 * mag * mag * mag
    }

    pub fn energy(&self, mag: f64) -> f64 {
        0.5 * self.k1 * mag * mag + 0.25 * self.k3 * mag.powi(4)
    }

    pub fn slope(&self, mag: f64) -> f64 {
        self.k1 + 3.0 * self.k3 * mag * mag
    }

    fn scaled(self, s: f64) -> Self {
        Self { k1: self.k1 * s, k3: self.k3 * s }
    }

    fn validate(&self) -> Result<(), String> {
        if !(self.k1.is_finite() && self.k3.is_finite()) || self.k1 < 0.0 || self.k3 < 0.0 {
            return Err(format!("coefficients must be finite and non-negative, got {self:?}"));
        }
        if self.k1 == 0.0 && self.k3 == 0.0 {
            return Err("k1 and k3 are both zero".into());
        }
        Ok(())
    }
}

/// Coefficients for all channels in one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeCoeffs {
    pub x: SpringCoeffs,
    pub y: SpringCoeffs,
    pub z_comp: SpringCoeffs,
    pub z_ext: SpringCoeffs,
    pub roll: SpringCoeffs,
    pub pitch: SpringCoeffs,
    pub yaw: SpringCoeffs,
}

impl ModeCoeffs {
    pub fn get(&self, axis: SpringAxis) -> SpringCoeffs {
        match axis {
            SpringAxis::X => self.x,
            SpringAxis::Y => self.y,
            SpringAxis::ZComp => self.z_comp,
            SpringAxis::ZExt => self.z_ext,
            SpringAxis::Roll => self.roll,
            SpringAxis::Pitch => self.pitch,
            SpringAxis::Yaw => self.yaw,
        }
    }

    pub fn get_mut(&mut self, axis: SpringAxis) -> &mut SpringCoeffs {
        match axis {
            SpringAxis::X => &mut self.x,
            SpringAxis::Y => &mut self.y,
            SpringAxis::ZComp => &mut self.z_comp,
            SpringAxis::ZExt => &mut self.z_ext,
            SpringAxis::Roll => &mut self.roll,
            SpringAxis::Pitch => &mut self.pitch,
            SpringAxis::Yaw => &mut self.yaw,
        }
    }

    /// Unscaled free-mode shape: 70 % linear, 30 % cubic at the reference
    /// deflection of each channel. Lateral channels give 5 N at 15 mm.
    pub fn free_template() -> Self {
        let shape = |force: f64, at: f64| SpringCoeffs::new(0.7 * force / at, 0.3 * force / (at * at * at));
        Self {
            x: shape(5.0, 15.0),
            y: shape(5.0, 15.0),
            z_comp: shape(20.0, 10.0),
            z_ext: shape(15.0, 10.0),
            roll: shape(0.3, 15.0),
            pitch: shape(0.3, 15.0),
            yaw: shape(0.3, 30.0),
        }
    }
}

/// Per-axis deformation limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeformationEnvelope {
    pub x_max: f64,
    pub y_max: f64,
    pub z_comp_max: f64,
    pub z_ext_max: f64,
    pub roll_max: f64,
    pub pitch_max: f64,
    /// Yaw limit with any joint locked.
    pub yaw_max_locked: f64,
    pub yaw_max_free: f64,
}

impl Default for DeformationEnvelope {
    fn default() -> Self {
        Self {
            x_max: 40.0,
            y_max: 40.0,
            z_comp_max: 20.0,
            z_ext_max: 10.0,
            roll_max: 15.0,
            pitch_max: 15.0,
            yaw_max_locked: 30.0,
            yaw_max_free: 45.0,
        }
    }
}

impl DeformationEnvelope {
    /// Allowed interval `[lo, hi]` for one axis in one mode.
    pub fn bounds(&self, axis: Axis, mode: StiffnessMode) -> (f64, f64) {
        let sym = |b: f64| (-b, b);
        match axis {
            Axis::X => sym(self.x_max),
            Axis::Y => sym(self.y_max),
            Axis::Z => (-self.z_ext_max, self.z_comp_max),
            Axis::Roll => sym(self.roll_max),
            Axis::Pitch => sym(self.pitch_max),
            Axis::Yaw if mode == StiffnessMode::Free => sym(self.yaw_max_free),
            Axis::Yaw => sym(self.yaw_max_locked),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let all = [
            self.x_max,
            self.y_max,
            self.z_comp_max,
            self.z_ext_max,
            self.roll_max,
            self.pitch_max,
            self.yaw_max_locked,
            self.yaw_max_free,
        ];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err("envelope bounds must be positive".into())
        }
    }
}

/// Clamps each axis into the envelope and reports which axes were clamped.
pub fn apply_envelope(
    defl: &Deflection6,
    mode: StiffnessMode,
    env: &DeformationEnvelope,
) -> (Deflection6, BTreeSet<Axis>) {
    let mut out = *defl;
    let mut at_limit = BTreeSet::new();
    for axis in Axis::ALL {
        let (lo, hi) = env.bounds(axis, mode);
        let v = defl[axis];
        if v > hi {
            out[axis] = hi;
            at_limit.insert(axis);
        } else if v < lo {
            out[axis] = lo;
            at_limit.insert(axis);
        }
    }
    (out, at_limit)
}

/// Calibrated compliance parameters for the three modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StiffnessParams {
    pub free: ModeCoeffs,
    pub half_lock: ModeCoeffs,
    pub full_lock: ModeCoeffs,
    pub envelope: DeformationEnvelope,
    /// Barrier slope past the envelope on translational axes, N/mm.
    pub barrier_gain: f64,
    /// Barrier slope past the envelope on rotational axes, N·m/deg.
    pub barrier_gain_rot: f64,
    /// Pitch stiffness multiplier applied in both locked modes. 1.0 keeps
    /// pitch mode-invariant.
    #[serde(default = "one")]
    pub pitch_lock_ratio: f64,
}

fn one() -> f64 {
    1.0
}

/// Reference deflection and force used for the default absolute scale:
/// free-mode Y reaches 5 N at 15 mm. Not a published value.
pub const BASE_SCALE_DEFLECTION: f64 = 15.0;
pub const DEFAULT_BASE_SCALE: f64 = 5.0;

impl Default for StiffnessParams {
    fn default() -> Self {
        calibrate(&default_anchors(), DEFAULT_BASE_SCALE).expect("default anchors are consistent")
    }
}

impl StiffnessParams {
    /// Template with every mode equal to the free-mode shape at `base_scale`.
    pub fn uncalibrated(base_scale: f64) -> Self {
        let template = ModeCoeffs::free_template();
        let unit = template.y.force(BASE_SCALE_DEFLECTION);
        let s = base_scale / unit;
        let mut free = template;
        for axis in SpringAxis::ALL {
            *free.get_mut(axis) = template.get(axis).scaled(s);
        }
        Self {
            free,
            half_lock: free,
            full_lock: free,
            envelope: DeformationEnvelope::default(),
            barrier_gain: 50.0,
            barrier_gain_rot: 1.0,
            pitch_lock_ratio: 1.0,
        }
    }

    pub fn mode(&self, mode: StiffnessMode) -> &ModeCoeffs {
        match mode {
            StiffnessMode::Free => &self.free,
            StiffnessMode::HalfLock => &self.half_lock,
            StiffnessMode::FullLock => &self.full_lock,
        }
    }

    fn mode_mut(&mut self, mode: StiffnessMode) -> &mut ModeCoeffs {
        match mode {
            StiffnessMode::Free => &mut self.free,
            StiffnessMode::HalfLock => &mut self.half_lock,
            StiffnessMode::FullLock => &mut self.full_lock,
        }
    }

    /// Effective coefficients, including the optional pitch coupling.
    pub fn coeffs(&self, mode: StiffnessMode, axis: SpringAxis) -> SpringCoeffs {
        let c = self.mode(mode).get(axis);
        if axis == SpringAxis::Pitch && mode != StiffnessMode::Free {
            c.scaled(self.pitch_lock_ratio)
        } else {
            c
        }
    }

    pub fn validate(&self) -> Result<(), WristError> {
        self.envelope.validate().map_err(WristError::InvalidParams)?;
        for mode in StiffnessMode::ALL {
            for axis in SpringAxis::ALL {
                self.mode(mode)
                    .get(axis)
                    .validate()
                    .map_err(|e| WristError::InvalidParams(format!("{mode} {axis:?}: {e}")))?;
            }
        }
        for z in [SpringAxis::ZComp, SpringAxis::ZExt] {
            if self.half_lock.get(z) != self.free.get(z) || self.full_lock.get(z) != self.free.get(z) {
                return Err(WristError::InvalidParams("Z coefficients must be identical across modes".into()));
            }
        }
        if !(self.barrier_gain > 0.0 && self.barrier_gain_rot > 0.0 && self.pitch_lock_ratio > 0.0) {
            return Err(WristError::InvalidParams("barrier gains and pitch ratio must be positive".into()));
        }
        Ok(())
    }

    fn barrier(&self, axis: Axis) -> f64 {
        if axis.is_rotation() {
            self.barrier_gain_rot
        } else {
            self.barrier_gain
        }
    }

    /// Restoring force on one axis (opposes the deflection).
    pub fn axis_reaction(&self, axis: Axis, value: f64, mode: StiffnessMode) -> f64 {
        if value == 0.0 {
            return 0.0;
        }
        let c = self.coeffs(mode, SpringAxis::for_deflection(axis, value));
        let (lo, hi) = self.envelope.bounds(axis, mode);
        let bound = if value > 0.0 { hi } else { -lo };
        let mag = value.abs();
        let over = (mag - bound).max(0.0);
        -(c.force(mag) + self.barrier(axis) * over).copysign(value)
    }

    /// d(reaction)/d(deflection) on one axis; always negative or zero.
    pub fn axis_slope(&self, axis: Axis, value: f64, mode: StiffnessMode) -> f64 {
        let c = self.coeffs(mode, SpringAxis::for_deflection(axis, value));
        let (lo, hi) = self.envelope.bounds(axis, mode);
        let bound = if value >= 0.0 { hi } else { -lo };
        let barrier = if value.abs() > bound { self.barrier(axis) } else { 0.0 };
        -(c.slope(value.abs()) + barrier)
    }

    /// Stored elastic energy; force is its negative gradient.
    pub fn axis_energy(&self, axis: Axis, value: f64, mode: StiffnessMode) -> f64 {
        let c = self.coeffs(mode, SpringAxis::for_deflection(axis, value));
        let (lo, hi) = self.envelope.bounds(axis, mode);
        let bound = if value >= 0.0 { hi } else { -lo };
        let over = (value.abs() - bound).max(0.0);
        c.energy(value.abs()) + 0.5 * self.barrier(axis) * over * over
    }
}

/// Reaction wrench of the wrist for a deflection in a mode.
pub fn reaction_wrench(defl: &Deflection6, mode: StiffnessMode, params: &StiffnessParams) -> Wrench6 {
    let mut w = Wrench6::ZERO;
    for axis in Axis::ALL {
        w[axis] = params.axis_reaction(axis, defl[axis], mode);
    }
    w
}

pub fn stored_energy(defl: &Deflection6, mode: StiffnessMode, params: &StiffnessParams) -> f64 {
    Axis::ALL.iter().map(|&a| params.axis_energy(a, defl[a], mode)).sum()
}

/// What an anchor pins down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorTarget {
    /// |F(mode)| / |F(free)| at the anchor deflection.
    Ratio(f64),
    /// |F(mode)| at the anchor deflection (N or N·m).
    Force(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationAnchor {
    pub axis: SpringAxis,
    pub mode: StiffnessMode,
    /// Deflection magnitude, mm or deg.
    pub deflection: f64,
    pub target: AnchorTarget,
}

impl CalibrationAnchor {
    pub fn ratio(axis: SpringAxis, mode: StiffnessMode, deflection: f64, ratio: f64) -> Self {
        Self { axis, mode, deflection, target: AnchorTarget::Ratio(ratio) }
    }

    pub fn force(axis: SpringAxis, mode: StiffnessMode, deflection: f64, force: f64) -> Self {
        Self { axis, mode, deflection, target: AnchorTarget::Force(force) }
    }
}

/// Measured mode ratios: full-lock Y is 2× free at 15 mm; full-lock yaw is
/// 3× free and half-lock yaw 2× free at 30°.
pub fn published_anchors() -> Vec<CalibrationAnchor> {
    use StiffnessMode::*;
    vec![
        CalibrationAnchor::ratio(SpringAxis::Y, FullLock, 15.0, 2.0),
        CalibrationAnchor::ratio(SpringAxis::Yaw, FullLock, 30.0, 3.0),
        CalibrationAnchor::ratio(SpringAxis::Yaw, HalfLock, 30.0, 2.0),
    ]
}

/// Measured ratios plus the X-axis ratios this crate assumes (half-lock 4×,
/// full-lock 5× free at 15 mm). No X ratio was measured; these only encode
/// "noticeably stiffer along X" with full-lock at least as stiff as half-lock.
pub fn default_anchors() -> Vec<CalibrationAnchor> {
    use StiffnessMode::*;
    let mut a = published_anchors();
    a.push(CalibrationAnchor::ratio(SpringAxis::X, HalfLock, 15.0, 4.0));
    a.push(CalibrationAnchor::ratio(SpringAxis::X, FullLock, 15.0, 5.0));
    a
}

/// Fits per-(axis, mode) coefficients to the anchors.
///
/// Starts from the free-mode template scaled so free Y gives `base_scale` at
/// 15 mm, with every locked mode equal to free. A single anchor on a channel
/// rescales the channel's free shape; two or more are fitted by least squares
/// on (k1, k3). Free-mode anchors are fitted first since ratio anchors are
/// relative to free. Z channels are copied from free into both locked modes.
pub fn calibrate(anchors: &[CalibrationAnchor], base_scale: f64) -> Result<StiffnessParams, WristError> {
    if !(base_scale.is_finite() && base_scale > 0.0) {
        return Err(WristError::InconsistentAnchors(format!("base scale {base_scale} must be positive")));
    }
    let mut params = StiffnessParams::uncalibrated(base_scale);

    for (i, a) in anchors.iter().enumerate() {
        if !(a.deflection.is_finite() && a.deflection > 0.0) {
            return Err(WristError::InconsistentAnchors(format!("anchor {i} has non-positive deflection")));
        }
        let value = match a.target {
            AnchorTarget::Ratio(r) | AnchorTarget::Force(r) => r,
        };
        if !(value.is_finite() && value > 0.0) {
            return Err(WristError::InconsistentAnchors(format!("anchor {i} has non-positive target")));
        }
        if a.mode == StiffnessMode::Free && matches!(a.target, AnchorTarget::Ratio(_)) {
            return Err(WristError::InconsistentAnchors(format!("anchor {i}: a ratio to free mode on free mode")));
        }
        for b in &anchors[..i] {
            if b.axis == a.axis && b.mode == a.mode && b.deflection == a.deflection && b.target != a.target {
                return Err(WristError::InconsistentAnchors(format!(
                    "{:?}/{} at {} has two different targets",
                    a.axis, a.mode, a.deflection
                )));
            }
        }
    }

    let free_shape = params.free;
    for mode in StiffnessMode::ALL {
        for axis in SpringAxis::ALL {
            let rows: Vec<(f64, f64)> = anchors
                .iter()
                .filter(|a| a.axis == axis && a.mode == mode)
                .map(|a| {
                    let target = match a.target {
                        AnchorTarget::Force(f) => f,
                        AnchorTarget::Ratio(r) => r * params.free.get(axis).force(a.deflection),
                    };
                    (a.deflection, target)
                })
                .collect();
            if rows.is_empty() {
                continue;
            }
            let fitted = fit_channel(free_shape.get(axis), &rows);
            *params.mode_mut(mode).get_mut(axis) = fitted;
        }
    }
    for z in [SpringAxis::ZComp, SpringAxis::ZExt] {
        let c = params.free.get(z);
        *params.half_lock.get_mut(z) = c;
        *params.full_lock.get_mut(z) = c;
    }

    for a in anchors {
        let achieved = params.mode(a.mode).get(a.axis).force(a.deflection);
        let (got, want) = match a.target {
            AnchorTarget::Force(f) => (achieved, f),
            AnchorTarget::Ratio(r) => (achieved / params.free.get(a.axis).force(a.deflection), r),
        };
        let err = (got - want).abs() / want;
        if err > 0.05 {
            return Err(WristError::InfeasibleCalibration {
                anchor: format!("{:?}/{} at {}", a.axis, a.mode, a.deflection),
                error_pct: err * 100.0,
            });
        }
    }
    params.validate()?;
    Ok(params)
}

/// Least-squares fit of F(δ) = k1·δ + k3·δ³ to `(δ, F)` rows with
/// non-negative coefficients. One row rescales `shape`.
fn fit_channel(shape: SpringCoeffs, rows: &[(f64, f64)]) -> SpringCoeffs {
    if let [(d, f)] = rows {
        return shape.scaled(f / shape.force(*d));
    }
    // Normal equations for columns [δ, δ³].
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(d, f) in rows {
        let (c1, c3) = (d, d * d * d);
        a11 += c1 * c1;
        a12 += c1 * c3;
        a22 += c3 * c3;
        b1 += c1 * f;
        b2 += c3 * f;
    }
    let det = a11 * a22 - a12 * a12;
    if det.abs() > 1e-12 * a11 * a22 {
        let k1 = (b1 * a22 - b2 * a12) / det;
        let k3 = (a11 * b2 - a12 * b1) / det;
        if k1 >= 0.0 && k3 >= 0.0 {
            return SpringCoeffs::new(k1, k3);
        }
    }
    // Constrained fits with one coefficient pinned at zero; keep the better one.
    let linear = SpringCoeffs::new((b1 / a11).max(0.0), 0.0);
    let cubic = SpringCoeffs::new(0.0, (b2 / a22).max(0.0));
    let sse = |c: &SpringCoeffs| rows.iter().map(|&(d, f)| (c.force(d) - f).powi(2)).sum::<f64>();
    if sse(&linear) <= sse(&cubic) {
        linear
    } else {
        cubic
    }
}

/// Fully rigid comparator: 1000 N/mm (and N·m/deg) on every axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidWrist {
    pub stiffness: f64,
}

impl Default for RigidWrist {
    fn default() -> Self {
        Self { stiffness: 1000.0 }
    }
}

/// Fin Ray comparator: a monotone piecewise-linear Y curve through 10 N at
/// 8 mm; every other axis rigid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinRayWrist {
    /// `(deflection mm, force N)` breakpoints starting at the origin.
    pub y_curve: Vec<(f64, f64)>,
    pub rigid: RigidWrist,
}

impl Default for FinRayWrist {
    fn default() -> Self {
        Self { y_curve: vec![(0.0, 0.0), (8.0, 10.0), (16.0, 30.0)], rigid: RigidWrist::default() }
    }
}

impl FinRayWrist {
    /// Force magnitude at |δ| = `mag`; the last segment's slope continues.
    pub fn y_force(&self, mag: f64) -> f64 {
        for w in self.y_curve.windows(2) {
            let ((d0, f0), (d1, f1)) = (w[0], w[1]);
            if mag <= d1 {
                return f0 + (f1 - f0) * (mag - d0) / (d1 - d0);
            }
        }
        let n = self.y_curve.len();
        let ((d0, f0), (d1, f1)) = (self.y_curve[n - 2], self.y_curve[n - 1]);
        f1 + (f1 - f0) / (d1 - d0) * (mag - d1)
    }

    fn y_slope(&self, mag: f64) -> f64 {
        let n = self.y_curve.len();
        for (i, w) in self.y_curve.windows(2).enumerate() {
            if mag < w[1].0 || i == n - 2 {
                return (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            }
        }
        unreachable!("curve has at least two points")
    }

    fn y_energy(&self, mag: f64) -> f64 {
        let mut e = 0.0;
        for w in self.y_curve.windows(2) {
            let ((d0, f0), (d1, _)) = (w[0], w[1]);
            let hi = mag.min(d1);
            if hi <= d0 {
                break;
            }
            e += (hi - d0) * 0.5 * (f0 + self.y_force(hi));
        }
        let last = self.y_curve[self.y_curve.len() - 1];
        if mag > last.0 {
            e += (mag - last.0) * 0.5 * (last.1 + self.y_force(mag));
        }
        e
    }
}

/// Any of the compliance models the simulator can mount between flange and gripper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WristModel {
    Claw(StiffnessParams),
    Rigid(RigidWrist),
    FinRay(FinRayWrist),
}

impl WristModel {
    pub fn claw_default() -> Self {
        WristModel::Claw(StiffnessParams::default())
    }

    pub fn axis_reaction(&self, axis: Axis, value: f64, mode: StiffnessMode) -> f64 {
        match self {
            WristModel::Claw(p) => p.axis_reaction(axis, value, mode),
            WristModel::Rigid(r) => -r.stiffness * value,
            WristModel::FinRay(f) if axis == Axis::Y => -f.y_force(value.abs()).copysign(value),
            WristModel::FinRay(f) => -f.rigid.stiffness * value,
        }
    }

    pub fn axis_slope(&self, axis: Axis, value: f64, mode: StiffnessMode) -> f64 {
        match self {
            WristModel::Claw(p) => p.axis_slope(axis, value, mode),
            WristModel::Rigid(r) => -r.stiffness,
            WristModel::FinRay(f) if axis == Axis::Y => -f.y_slope(value.abs()),
            WristModel::FinRay(f) => -f.rigid.stiffness,
        }
    }

    pub fn axis_energy(&self, axis: Axis, value: f64, mode: StiffnessMode) -> f64 {
        match self {
            WristModel::Claw(p) => p.axis_energy(axis, value, mode),
            WristModel::Rigid(r) => 0.5 * r.stiffness * value * value,
            WristModel::FinRay(f) if axis == Axis::Y => f.y_energy(value.abs()),
            WristModel::FinRay(f) => 0.5 * f.rigid.stiffness * value * value,
        }
    }

    pub fn reaction(&self, defl: &Deflection6, mode: StiffnessMode) -> Wrench6 {
        let mut w = Wrench6::ZERO;
        for axis in Axis::ALL {
            w[axis] = self.axis_reaction(axis, defl[axis], mode);
        }
        w
    }

    /// Envelope used for reporting; the comparators have none.
    pub fn envelope(&self) -> Option<&DeformationEnvelope> {
        match self {
            WristModel::Claw(p) => Some(&p.envelope),
            _ => None,
        }
    }
}
