//! Declarative scenario setup and its JSON file format.

use crate::contact::{DoorGeometry, PegGeometry, WallGeometry, MIN_CLEARANCE};
use crate::controller::{ControllerGains, EStopMonitor};
use crate::lockstate::StiffnessMode;
use crate::types::Pose6;
use crate::wristmodel::{FinRayWrist, RigidWrist, WristModel};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

pub const SPEC_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    /// Dotted path of the offending field, e.g. `geometry.hole_clearance`.
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    PegInHole,
    DoorHandle,
    WallTouch,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::PegInHole => "peg_in_hole",
            ScenarioKind::DoorHandle => "door_handle",
            ScenarioKind::WallTouch => "wall_touch",
        }
    }
}

/// Gripper under test: the soft wrist in one of its modes, or a comparator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GripperKind {
    #[default]
    ClawFree,
    ClawHalf,
    ClawFull,
    Rigid,
    Finray,
}

impl GripperKind {
    pub const ALL: [GripperKind; 5] =
        [GripperKind::ClawFree, GripperKind::ClawHalf, GripperKind::ClawFull, GripperKind::Rigid, GripperKind::Finray];

    pub fn as_str(self) -> &'static str {
        match self {
            GripperKind::ClawFree => "claw_free",
            GripperKind::ClawHalf => "claw_half",
            GripperKind::ClawFull => "claw_full",
            GripperKind::Rigid => "rigid",
            GripperKind::Finray => "finray",
        }
    }

    /// Lever position the gripper starts in. Comparators have no lock; their
    /// mode is carried only for logging.
    pub fn initial_mode(self) -> StiffnessMode {
        match self {
            GripperKind::ClawHalf => StiffnessMode::HalfLock,
            GripperKind::ClawFull => StiffnessMode::FullLock,
            _ => StiffnessMode::Free,
        }
    }

    pub fn wrist(self) -> WristModel {
        match self {
            GripperKind::ClawFree | GripperKind::ClawHalf | GripperKind::ClawFull => WristModel::claw_default(),
            GripperKind::Rigid => WristModel::Rigid(RigidWrist::default()),
            GripperKind::Finray => WristModel::FinRay(FinRayWrist::default()),
        }
    }
}

impl fmt::Display for GripperKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GripperKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        GripperKind::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| format!("unknown gripper '{s}' (expected claw_free, claw_half, claw_full, rigid or finray)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Geometry {
    Peg(PegGeometry),
    Door(DoorGeometry),
    Wall(WallGeometry),
}

impl Geometry {
    pub fn default_for(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::PegInHole => Geometry::Peg(PegGeometry::default()),
            ScenarioKind::DoorHandle => Geometry::Door(DoorGeometry::default()),
            ScenarioKind::WallTouch => Geometry::Wall(WallGeometry::default()),
        }
    }

    pub fn kind(&self) -> ScenarioKind {
        match self {
            Geometry::Peg(_) => ScenarioKind::PegInHole,
            Geometry::Door(_) => ScenarioKind::DoorHandle,
            Geometry::Wall(_) => ScenarioKind::WallTouch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeEvent {
    pub t: f64,
    pub mode: StiffnessMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EStopConfig {
    /// N.
    pub force_threshold: f64,
    /// N·m.
    pub torque_threshold: f64,
}

impl Default for EStopConfig {
    fn default() -> Self {
        let m = EStopMonitor::default();
        Self { force_threshold: m.force_threshold, torque_threshold: m.torque_threshold }
    }
}

impl EStopConfig {
    pub fn monitor(&self) -> EStopMonitor {
        EStopMonitor::new(self.force_threshold, self.torque_threshold)
    }
}

/// A complete scenario description.
///
/// `gripper` is optional in files and defaults to `claw_free`. An entry of
/// `mode_schedule` at t = 0 overrides the gripper's starting mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub spec_version: u32,
    pub kind: ScenarioKind,
    pub gripper: GripperKind,
    pub geometry: Geometry,
    pub initial_misalignment: Pose6,
    pub mode_schedule: Vec<ModeEvent>,
    pub gains: ControllerGains,
    pub estop: EStopConfig,
    pub seed: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    spec_version: u32,
    kind: ScenarioKind,
    #[serde(default)]
    gripper: GripperKind,
    #[serde(default)]
    geometry: Option<serde_json::Value>,
    #[serde(default)]
    initial_misalignment: Pose6,
    #[serde(default)]
    mode_schedule: Vec<ModeEvent>,
    #[serde(default)]
    gains: ControllerGains,
    #[serde(default)]
    estop: EStopConfig,
    #[serde(default)]
    seed: u64,
}

fn path_error<E: fmt::Display>(prefix: &str, err: serde_path_to_error::Error<E>) -> ConfigError {
    let path = err.path().to_string();
    let field = match (prefix.is_empty(), path.as_str()) {
        (true, ".") => "<root>".to_string(),
        (true, _) => path,
        (false, ".") => prefix.to_string(),
        (false, _) => format!("{prefix}.{path}"),
    };
    ConfigError::new(field, err.into_inner().to_string())
}

fn geometry_from(kind: ScenarioKind, value: serde_json::Value) -> Result<Geometry, ConfigError> {
    fn parse<T: serde::de::DeserializeOwned>(v: serde_json::Value) -> Result<T, ConfigError> {
        serde_path_to_error::deserialize(v).map_err(|e| path_error("geometry", e))
    }
    Ok(match kind {
        ScenarioKind::PegInHole => Geometry::Peg(parse(value)?),
        ScenarioKind::DoorHandle => Geometry::Door(parse(value)?),
        ScenarioKind::WallTouch => Geometry::Wall(parse(value)?),
    })
}

impl ScenarioConfig {
    pub fn default_for(kind: ScenarioKind) -> Self {
        Self {
            spec_version: SPEC_VERSION,
            kind,
            gripper: GripperKind::default(),
            geometry: Geometry::default_for(kind),
            initial_misalignment: Pose6::ZERO,
            mode_schedule: Vec::new(),
            gains: ControllerGains::default(),
            estop: EStopConfig::default(),
            seed: 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| path_error("", e))?;
        Self::from_raw(raw)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self, ConfigError> {
        let raw: RawConfig = serde_path_to_error::deserialize(value).map_err(|e| path_error("", e))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self, ConfigError> {
        let geometry = match raw.geometry {
            Some(v) => geometry_from(raw.kind, v)?,
            None => Geometry::default_for(raw.kind),
        };
        let cfg = Self {
            spec_version: raw.spec_version,
            kind: raw.kind,
            gripper: raw.gripper,
            geometry,
            initial_misalignment: raw.initial_misalignment,
            mode_schedule: raw.mode_schedule,
            gains: raw.gains,
            estop: raw.estop,
            seed: raw.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Compact JSON with fixed key order; the basis of `config_hash`.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON.
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.spec_version != SPEC_VERSION {
            return Err(ConfigError::new(
                "spec_version",
                format!("unsupported version {}, expected {SPEC_VERSION}", self.spec_version),
            ));
        }
        if self.geometry.kind() != self.kind {
            return Err(ConfigError::new("geometry", format!("block does not match kind {}", self.kind.as_str())));
        }
        let geo = |e: crate::contact::ContactError| match e {
            crate::contact::ContactError::GeometryViolation { field, reason } => {
                ConfigError::new(format!("geometry.{field}"), reason)
            }
        };
        match &self.geometry {
            Geometry::Peg(p) => {
                p.validate().map_err(geo)?;
                if p.hole_clearance < MIN_CLEARANCE {
                    return Err(ConfigError::new(
                        "geometry.hole_clearance",
                        format!("must be at least {MIN_CLEARANCE} mm, got {}", p.hole_clearance),
                    ));
                }
            }
            Geometry::Door(d) => d.validate().map_err(geo)?,
            Geometry::Wall(w) => w.validate().map_err(geo)?,
        }
        if !self.initial_misalignment.is_finite() {
            return Err(ConfigError::new("initial_misalignment", "must be finite"));
        }
        let mut prev = f64::NEG_INFINITY;
        for (i, ev) in self.mode_schedule.iter().enumerate() {
            if !(ev.t.is_finite() && ev.t >= 0.0) {
                return Err(ConfigError::new(format!("mode_schedule[{i}].t"), "must be a non-negative time"));
            }
            if ev.t <= prev {
                return Err(ConfigError::new(format!("mode_schedule[{i}].t"), "times must be strictly increasing"));
            }
            prev = ev.t;
        }
        self.gains.validate().map_err(|e| ConfigError::new("gains", e.to_string()))?;
        for (name, v) in [
            ("estop.force_threshold", self.estop.force_threshold),
            ("estop.torque_threshold", self.estop.torque_threshold),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::new(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Lever position at t = 0.
    pub fn initial_mode(&self) -> StiffnessMode {
        match self.mode_schedule.first() {
            Some(ev) if ev.t == 0.0 => ev.mode,
            _ => self.gripper.initial_mode(),
        }
    }

    pub fn peg(&self) -> Option<&PegGeometry> {
        match &self.geometry {
            Geometry::Peg(p) => Some(p),
            _ => None,
        }
    }

    pub fn door(&self) -> Option<&DoorGeometry> {
        match &self.geometry {
            Geometry::Door(d) => Some(d),
            _ => None,
        }
    }

    pub fn wall(&self) -> Option<&WallGeometry> {
        match &self.geometry {
            Geometry::Wall(w) => Some(w),
            _ => None,
        }
    }
}

impl<'de> Deserialize<'de> for ScenarioConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(d)?;
        Self::from_value(value).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        for kind in [ScenarioKind::PegInHole, ScenarioKind::DoorHandle, ScenarioKind::WallTouch] {
            let c = ScenarioConfig::default_for(kind);
            let back = ScenarioConfig::from_json(&c.to_json_pretty()).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.config_hash(), c.config_hash());
        }
    }

    #[test]
    fn minimal_file_fills_defaults() {
        let c = ScenarioConfig::from_json(r#"{"spec_version":1,"kind":"peg_in_hole"}"#).unwrap();
        assert_eq!(c, ScenarioConfig::default_for(ScenarioKind::PegInHole));
    }

    #[test]
    fn field_level_errors() {
        let e = ScenarioConfig::from_json(
            r#"{"spec_version":1,"kind":"peg_in_hole","geometry":{"peg_width":10,"hole_clearance":0,"hole_depth":10,"chamfer_depth":1}}"#,
        )
        .unwrap_err();
        assert_eq!(e.field, "geometry.hole_clearance");

        let e = ScenarioConfig::from_json(
            r#"{"spec_version":1,"kind":"peg_in_hole","geometry":{"peg_width":10,"hole_clearance":0.01,"hole_depth":10,"chamfer_depth":1}}"#,
        )
        .unwrap_err();
        assert_eq!(e.field, "geometry.hole_clearance");

        let e = ScenarioConfig::from_json(
            r#"{"spec_version":1,"kind":"door_handle","geometry":{"handle_spring":0.02,"latch_angle":95,"handle_length":80}}"#,
        )
        .unwrap_err();
        assert_eq!(e.field, "geometry.latch_angle");

        let e = ScenarioConfig::from_json(
            r#"{"spec_version":1,"kind":"door_handle","mode_schedule":[{"t":1,"mode":"free"},{"t":1,"mode":"full_lock"}]}"#,
        )
        .unwrap_err();
        assert_eq!(e.field, "mode_schedule[1].t");

        let e = ScenarioConfig::from_json(r#"{"spec_version":2,"kind":"wall_touch"}"#).unwrap_err();
        assert_eq!(e.field, "spec_version");

        let e = ScenarioConfig::from_json(r#"{"spec_version":1,"kind":"wall_touch","mode_schedule":[{"t":0,"mode":"locked"}]}"#)
            .unwrap_err();
        assert!(e.field.starts_with("mode_schedule[0].mode"), "{e}");

        let e = ScenarioConfig::from_json(r#"{"spec_version":1,"kind":"wall_touch","colour":3}"#).unwrap_err();
        assert!(e.message.contains("colour"), "{e}");
    }

    #[test]
    fn hash_tracks_content() {
        let a = ScenarioConfig::default_for(ScenarioKind::PegInHole);
        let mut b = a.clone();
        b.seed = 7;
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 16);
    }

    #[test]
    fn schedule_at_zero_sets_initial_mode() {
        let mut c = ScenarioConfig::default_for(ScenarioKind::DoorHandle);
        assert_eq!(c.initial_mode(), StiffnessMode::Free);
        c.mode_schedule = vec![ModeEvent { t: 0.0, mode: StiffnessMode::FullLock }];
        assert_eq!(c.initial_mode(), StiffnessMode::FullLock);
    }
}
