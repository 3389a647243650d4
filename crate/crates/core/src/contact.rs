//! Quasi-static environment contact models.
//!
//! All models take the gripper (finger unit) pose in the world frame and
//! return the wrench the environment applies to the gripper. Contact is
//! penalty-based: penetration times a contact stiffness along the
//! separating normal.

use crate::types::{Pose6, Wrench6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_CONTACT_STIFFNESS: f64 = 50.0;
pub const DEFAULT_FRICTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContactError {
    #[error("geometry violation: {field} {reason}")]
    GeometryViolation { field: &'static str, reason: String },
}

fn positive(field: &'static str, v: f64) -> Result<(), ContactError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ContactError::GeometryViolation { field, reason: format!("must be positive, got {v}") })
    }
}

fn default_stiffness() -> f64 {
    DEFAULT_CONTACT_STIFFNESS
}
fn default_friction() -> f64 {
    DEFAULT_FRICTION
}

/// Square peg over a chamfered hole centered at the world origin.
///
/// The hole's top face is at z = 0; the peg tip is at the gripper point.
/// `hole_clearance` is diametral, so each side has half of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PegGeometry {
    pub peg_width: f64,
    pub hole_clearance: f64,
    pub hole_depth: f64,
    /// Depth (and width) of the 45° chamfer at the hole mouth.
    pub chamfer_depth: f64,
    /// N/mm.
    #[serde(default = "default_stiffness")]
    pub contact_stiffness: f64,
    #[serde(default = "default_friction")]
    pub friction: f64,
}

impl Default for PegGeometry {
    fn default() -> Self {
        Self {
            peg_width: 10.0,
            hole_clearance: 0.1,
            hole_depth: 10.0,
            chamfer_depth: 1.5,
            contact_stiffness: DEFAULT_CONTACT_STIFFNESS,
            friction: DEFAULT_FRICTION,
        }
    }
}

/// Smallest clearance the contact model is meant for, mm.
pub const MIN_CLEARANCE: f64 = 0.05;

impl PegGeometry {
    pub fn validate(&self) -> Result<(), ContactError> {
        positive("peg_width", self.peg_width)?;
        positive("hole_clearance", self.hole_clearance)?;
        positive("hole_depth", self.hole_depth)?;
        positive("contact_stiffness", self.contact_stiffness)?;
        if !(self.chamfer_depth.is_finite() && self.chamfer_depth >= 0.0) {
            return Err(ContactError::GeometryViolation {
                field: "chamfer_depth",
                reason: format!("must be non-negative, got {}", self.chamfer_depth),
            });
        }
        if !(self.friction.is_finite() && self.friction >= 0.0) {
            return Err(ContactError::GeometryViolation { field: "friction", reason: "must be non-negative".into() });
        }
        Ok(())
    }

    /// Half-width of the straight bore.
    pub fn bore_half_width(&self) -> f64 {
        0.5 * (self.peg_width + self.hole_clearance)
    }

    /// Half-width of the hole mouth at the top of the chamfer.
    pub fn mouth_half_width(&self) -> f64 {
        self.bore_half_width() + self.chamfer_depth
    }

    /// Largest lateral offset from which the chamfer can still catch the peg.
    pub fn capture_offset(&self) -> f64 {
        0.5 * self.hole_clearance + self.chamfer_depth
    }
}

/// Which surface a peg corner is pressed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PegContactKind {
    Free,
    Rim,
    Chamfer,
    Wall,
}

/// Contact of one peg corner against one side of the hole, in a plane
/// spanned by a lateral axis and Z. Values are for the +lateral side.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SideContact {
    kind: PegContactKind,
    lateral: f64,
    vertical: f64,
}

/// Corner at (`corner_x`, `tip_z`) against the +side obstacle:
/// bore wall at x = r0 below z = −h, 45° chamfer up to (r0 + h, 0), flat rim beyond.
///
/// The surface a corner presses on is chosen by the corner's lateral band
/// rather than by the nearest boundary, so a corner sunk into the rim cannot
/// jump onto the chamfer.
fn side_contact(corner_x: f64, tip_z: f64, g: &PegGeometry) -> SideContact {
    let none = SideContact { kind: PegContactKind::Free, lateral: 0.0, vertical: 0.0 };
    let r0 = g.bore_half_width();
    let h = g.chamfer_depth;
    if corner_x < r0 {
        return none;
    }
    let (kind, pen, n) = if corner_x >= r0 + h {
        (PegContactKind::Rim, -tip_z, (0.0, 1.0))
    } else if tip_z >= -h {
        let surface = -h + (corner_x - r0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        (PegContactKind::Chamfer, (surface - tip_z) * s, (-s, s))
    } else {
        (PegContactKind::Wall, corner_x - r0, (-1.0, 0.0))
    };
    if pen <= 0.0 {
        return none;
    }
    let normal = g.contact_stiffness * pen;
    // Friction along the contact tangent, opposing insertion (pointing up).
    let t = (n.1, -n.0);
    let t = if t.1 < 0.0 { (-t.0, -t.1) } else { t };
    let friction = if t.1 > 0.0 { g.friction * normal } else { 0.0 };
    SideContact { kind, lateral: normal * n.0 + friction * t.0, vertical: normal * n.1 + friction * t.1 }
}

/// Lateral and vertical force in one lateral plane for peg-center offset `e`.
fn plane_contact(e: f64, tip_z: f64, g: &PegGeometry) -> (f64, f64, PegContactKind, PegContactKind) {
    let half = 0.5 * g.peg_width;
    let plus = side_contact(e + half, tip_z, g);
    let minus = side_contact(-e + half, tip_z, g);
    (plus.lateral - minus.lateral, plus.vertical + minus.vertical, plus.kind, minus.kind)
}

/// Planar two-surface contact per lateral axis: the X–Z and Y–Z planes are
/// evaluated independently and their vertical reactions summed.
pub fn peg_contact_wrench(gripper: &Pose6, g: &PegGeometry) -> Wrench6 {
    let (fx, fzx, ..) = plane_contact(gripper.x, gripper.z, g);
    let (fy, fzy, ..) = plane_contact(gripper.y, gripper.z, g);
    Wrench6 { fx, fy, fz: fzx + fzy, ..Wrench6::ZERO }
}

/// Contact classification of the +side and −side corners in the X–Z plane.
pub fn peg_contact_kinds(offset: f64, tip_z: f64, g: &PegGeometry) -> (PegContactKind, PegContactKind) {
    let (_, _, p, m) = plane_contact(offset, tip_z, g);
    (p, m)
}

pub fn insertion_depth(gripper: &Pose6) -> f64 {
    (-gripper.z).max(0.0)
}

/// Spring-loaded lever handle with a latch, on a door in the world X–Y plane.
///
/// The hinge axis is parallel to world Z (the tool axis), so turning the
/// handle moves the grasp point along an arc in X–Y. At rest the grasp point
/// is at the world origin and the arc's tangent there is tilted
/// `REST_TILT` below +X, which keeps the path mostly along X. Positive angle
/// turns the handle toward +X. Until the latch releases the door holds the
/// grasp point at z = 0; after that the door swings freely along Z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoorGeometry {
    /// Return spring, N·m/deg.
    pub handle_spring: f64,
    /// Angle at which the latch releases, deg.
    pub latch_angle: f64,
    /// Hinge-to-grasp distance, mm.
    pub handle_length: f64,
    /// Radial, end-stop and latched-door stiffness, N/mm.
    #[serde(default = "default_stiffness")]
    pub contact_stiffness: f64,
    /// Grasp torque below which the gripper lets the handle go in free mode, N·m.
    #[serde(default = "default_release")]
    pub release_threshold: f64,
    /// Time constant of the handle's unassisted return, s.
    #[serde(default = "default_return_tau")]
    pub return_time_constant: f64,
}

/// Tilt of the handle's arc tangent at rest, deg.
pub const REST_TILT: f64 = 30.0;

fn default_release() -> f64 {
    0.5
}
fn default_return_tau() -> f64 {
    0.05
}

impl Default for DoorGeometry {
    fn default() -> Self {
        Self {
            handle_spring: 0.02,
            latch_angle: 45.0,
            handle_length: 80.0,
            contact_stiffness: DEFAULT_CONTACT_STIFFNESS,
            release_threshold: default_release(),
            return_time_constant: default_return_tau(),
        }
    }
}

// Outward radial direction at handle angle `deg`.
fn radial(deg: f64) -> (f64, f64) {
    let p = (deg - REST_TILT).to_radians();
    (p.sin(), -p.cos())
}

impl DoorGeometry {
    pub fn validate(&self) -> Result<(), ContactError> {
        positive("handle_spring", self.handle_spring)?;
        positive("handle_length", self.handle_length)?;
        positive("contact_stiffness", self.contact_stiffness)?;
        positive("release_threshold", self.release_threshold)?;
        positive("return_time_constant", self.return_time_constant)?;
        if !(self.latch_angle > 0.0 && self.latch_angle <= 90.0) {
            return Err(ContactError::GeometryViolation {
                field: "latch_angle",
                reason: format!("must be in (0, 90], got {}", self.latch_angle),
            });
        }
        Ok(())
    }

    /// Hinge position in the X–Y plane.
    pub fn hinge(&self) -> (f64, f64) {
        let (ux, uy) = radial(0.0);
        (-self.handle_length * ux, -self.handle_length * uy)
    }

    /// Handle angle implied by a grasp point, deg.
    pub fn angle_at(&self, gripper: &Pose6) -> f64 {
        let (hx, hy) = self.hinge();
        (gripper.x - hx).atan2(hy - gripper.y).to_degrees() + REST_TILT
    }

    /// Grasp point for a handle angle, (x, y).
    pub fn grasp_point(&self, angle_deg: f64) -> (f64, f64) {
        let (hx, hy) = self.hinge();
        let (ux, uy) = radial(angle_deg);
        (hx + self.handle_length * ux, hy + self.handle_length * uy)
    }

    /// Return-spring torque at an angle, N·m.
    pub fn spring_torque(&self, angle_deg: f64) -> f64 {
        self.handle_spring * angle_deg
    }

    /// Torque of an X–Y force applied at `at`, about the hinge, N·m.
    pub fn torque_about_hinge(&self, at: &Pose6, fx: f64, fy: f64) -> f64 {
        let (hx, hy) = self.hinge();
        ((at.x - hx) * fy - (at.y - hy) * fx) * 1e-3
    }
}

/// Handle state carried between steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandleState {
    pub angle: f64,
    pub latch_released: bool,
    pub grasped: bool,
}

impl Default for HandleState {
    fn default() -> Self {
        Self { angle: 0.0, latch_released: false, grasped: true }
    }
}

/// Wrench the handle applies to the gripper while grasped: the spring's
/// tangential resistance, a stiff radial constraint keeping the grasp on the
/// handle's arc, an end stop below 0°, and the latched door holding Z.
/// Zero once the handle has been let go.
pub fn door_contact_wrench(gripper: &Pose6, g: &DoorGeometry, state: &HandleState) -> Wrench6 {
    if !state.grasped {
        return Wrench6::ZERO;
    }
    let (hx, hy) = g.hinge();
    let (rx, ry) = (gripper.x - hx, gripper.y - hy);
    let r = (rx * rx + ry * ry).sqrt();
    if r == 0.0 {
        return Wrench6::ZERO;
    }
    let (ux, uy) = (rx / r, ry / r);
    // Direction of increasing angle.
    let (tx, ty) = (-uy, ux);
    let radial = -g.contact_stiffness * (r - g.handle_length);
    let angle = rx.atan2(-ry).to_degrees() + REST_TILT;
    let tangential = if angle >= 0.0 {
        -g.spring_torque(angle) / (g.handle_length * 1e-3)
    } else {
        -g.contact_stiffness * g.handle_length * angle.to_radians()
    };
    let fz = if state.latch_released { 0.0 } else { -g.contact_stiffness * gripper.z };
    Wrench6 { fx: radial * ux + tangential * tx, fy: radial * uy + tangential * ty, fz, ..Wrench6::ZERO }
}

/// Flat wall normal to X at `wall_distance` from the start pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallGeometry {
    pub wall_distance: f64,
    /// How far past the wall the scripted approach commands, mm.
    pub overshoot: f64,
    #[serde(default = "default_stiffness")]
    pub contact_stiffness: f64,
}

impl Default for WallGeometry {
    fn default() -> Self {
        Self { wall_distance: 20.0, overshoot: 5.0, contact_stiffness: DEFAULT_CONTACT_STIFFNESS }
    }
}

impl WallGeometry {
    pub fn validate(&self) -> Result<(), ContactError> {
        positive("wall_distance", self.wall_distance)?;
        positive("contact_stiffness", self.contact_stiffness)?;
        if !(self.overshoot.is_finite() && self.overshoot >= 0.0) {
            return Err(ContactError::GeometryViolation { field: "overshoot", reason: "must be non-negative".into() });
        }
        Ok(())
    }
}

pub fn wall_contact_wrench(gripper: &Pose6, g: &WallGeometry) -> Wrench6 {
    let pen = gripper.x - g.wall_distance;
    let fx = if pen > 0.0 { -g.contact_stiffness * pen } else { 0.0 };
    Wrench6 { fx, ..Wrench6::ZERO }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(x: f64, y: f64, z: f64) -> Pose6 {
        Pose6 { x, y, z, ..Pose6::ZERO }
    }

    #[test]
    fn centered_peg_has_no_contact() {
        let g = PegGeometry::default();
        for z in [5.0, 0.0, -0.5, -5.0, -20.0] {
            assert_eq!(peg_contact_wrench(&at(0.0, 0.0, z), &g), Wrench6::ZERO);
        }
    }

    #[test]
    fn rim_contact_is_purely_vertical() {
        let g = PegGeometry::default();
        let offset = g.hole_clearance + g.chamfer_depth + 0.5;
        let w = peg_contact_wrench(&at(offset, 0.0, -0.2), &g);
        assert_eq!(peg_contact_kinds(offset, -0.2, &g).0, PegContactKind::Rim);
        assert_eq!(w.fx, 0.0);
        assert!((w.fz - g.contact_stiffness * 0.2).abs() < 1e-9);
    }

    #[test]
    fn chamfer_pushes_toward_center() {
        let g = PegGeometry::default();
        for sign in [1.0, -1.0] {
            let e = sign * 1.0;
            let w = peg_contact_wrench(&at(e, 0.0, -0.6), &g);
            assert!(w.fx * e < 0.0, "offset {e} force {}", w.fx);
            assert!(w.fz > 0.0);
            let w = peg_contact_wrench(&at(0.0, e, -0.6), &g);
            assert!(w.fy * e < 0.0);
        }
    }

    #[test]
    fn wall_friction_opposes_insertion() {
        let g = PegGeometry::default();
        // Flank pressed 0.1 mm into the +x bore wall, 5 mm deep.
        let e = 0.5 * g.hole_clearance + 0.1;
        let w = peg_contact_wrench(&at(e, 0.0, -5.0), &g);
        assert_eq!(peg_contact_kinds(e, -5.0, &g).0, PegContactKind::Wall);
        assert!((w.fx + g.contact_stiffness * 0.1).abs() < 1e-9);
        assert!((w.fz - g.friction * g.contact_stiffness * 0.1).abs() < 1e-9);
    }

    #[test]
    fn peg_geometry_validation() {
        let g = PegGeometry { hole_clearance: 0.0, ..PegGeometry::default() };
        assert!(matches!(g.validate(), Err(ContactError::GeometryViolation { field: "hole_clearance", .. })));
        let g = PegGeometry { peg_width: -1.0, ..PegGeometry::default() };
        assert!(g.validate().is_err());
    }

    #[test]
    fn handle_torque_examples() {
        let g = DoorGeometry::default();
        let s = HandleState::default();
        assert_eq!(g.spring_torque(0.0), 0.0);
        assert!(door_contact_wrench(&at(0.0, 0.0, 0.0), &g, &s).force_norm() < 1e-12);
        let (x, y) = g.grasp_point(45.0);
        let p = at(x, y, 0.0);
        let w = door_contact_wrench(&p, &g, &s);
        assert!((g.torque_about_hinge(&p, w.fx, w.fy) + 0.9).abs() < 1e-9);
        assert!((g.angle_at(&p) - 45.0).abs() < 1e-9);
    }

    #[test]
    fn rest_tangent_is_tilted_below_x() {
        let g = DoorGeometry::default();
        let (x, y) = g.grasp_point(1e-6);
        let tilt = y.atan2(x).to_degrees();
        assert!((tilt + REST_TILT).abs() < 1e-3, "{tilt}");
    }

    #[test]
    fn latched_door_holds_z() {
        let g = DoorGeometry::default();
        let mut s = HandleState::default();
        assert_eq!(door_contact_wrench(&at(0.0, 0.0, 2.0), &g, &s).fz, -100.0);
        s.latch_released = true;
        assert_eq!(door_contact_wrench(&at(0.0, 0.0, 2.0), &g, &s).fz, 0.0);
    }

    #[test]
    fn released_handle_exerts_nothing() {
        let g = DoorGeometry::default();
        let s = HandleState { angle: 30.0, latch_released: true, grasped: false };
        assert_eq!(door_contact_wrench(&at(10.0, 0.0, -2.0), &g, &s), Wrench6::ZERO);
    }

    #[test]
    fn wall_penalty() {
        let g = WallGeometry::default();
        assert_eq!(wall_contact_wrench(&at(19.0, 0.0, 0.0), &g).fx, 0.0);
        assert_eq!(wall_contact_wrench(&at(21.0, 0.0, 0.0), &g).fx, -50.0);
    }
}
