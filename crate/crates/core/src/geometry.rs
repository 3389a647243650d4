//! Loop geometry of the looped leaf spring.
//!
//! The loop is approximated as two semicircular arcs joined by straight
//! segments. Given the spring dimensions this module computes the lateral
//! loop width, the maximum finger-unit displacement reached when the spring
//! is pulled straight, and the allowable displacement (80 % of the maximum).
//!
//! `x0` is taken as the unloaded X coordinate of clamp point C in the
//! joint-axis frame. Where exactly that coordinate is measured from is not
//! pinned down by the source design, so treat design points that depend on
//! it with care.
//!
//! All values are millimeters.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::str::FromStr;
use thiserror::Error;

/// Fraction of the straight-spring limit that is considered safe to use.
pub const ALLOWABLE_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid leaf-spring spec: {0}")]
    InvalidSpec(String),
    #[error("invalid sweep range `{0}`: {1}")]
    InvalidRange(String, String),
}

/// Leaf-spring dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeafSpringSpec {
    /// Arc radius R.
    pub r: f64,
    /// Total spring length between the joint axes, L(a-a').
    pub l_total: f64,
    /// Inter-axial distance between the two rotary joints.
    pub d: f64,
    /// Clamped length at the finger unit, L(c-c').
    pub l_clamp: f64,
    /// Joint-to-arc length, L(a-b).
    pub l_joint_arm: f64,
    /// Unloaded position of clamp point C along X.
    pub x0: f64,
}

/// Clamp length used when none is given. Not a published dimension.
pub const DEFAULT_L_CLAMP: f64 = 20.0;
/// Joint-to-arc length used when none is given. Not a published dimension.
pub const DEFAULT_L_JOINT_ARM: f64 = 5.0;
/// Maximum displacement the default `x0` is chosen to produce.
pub const DEFAULT_X_MAX: f64 = 47.5;

impl LeafSpringSpec {
    /// The reference build: R = 15 mm, 180 mm spring, 90 mm loop width.
    ///
    /// `d` is recovered from the loop width; `l_clamp`, `l_joint_arm` and
    /// `x0` are placeholders (see [`LeafSpringSpec::placeholder_fields`]) with
    /// `x0` solved so that the maximum displacement is 47.5 mm.
    pub fn reference() -> Self {
        let r = 15.0;
        let l_total = 180.0;
        let d = compute_joint_distance(90.0, l_total, r).expect("reference width is feasible");
        Self::with_target_x_max(r, l_total, d, DEFAULT_L_CLAMP, DEFAULT_L_JOINT_ARM, DEFAULT_X_MAX)
    }

    /// Builds a spec whose `x0` yields the requested maximum displacement.
    pub fn with_target_x_max(r: f64, l_total: f64, d: f64, l_clamp: f64, l_joint_arm: f64, x_max: f64) -> Self {
        let l_bc = semi_arc_length(l_total, l_clamp, l_joint_arm);
        let straight = (l_bc * l_bc - 4.0 * r * r).max(0.0).sqrt();
        Self { r, l_total, d, l_clamp, l_joint_arm, x0: straight - x_max }
    }

    /// Fields of [`LeafSpringSpec::reference`] that are defaults rather than published values.
    pub fn placeholder_fields() -> &'static [&'static str] {
        &["L_clamp", "L_joint_arm", "X0"]
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let fields = [
            ("R", self.r),
            ("L_total", self.l_total),
            ("d", self.d),
            ("L_clamp", self.l_clamp),
            ("L_joint_arm", self.l_joint_arm),
            ("X0", self.x0),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(GeometryError::InvalidSpec(format!("{name} is not finite")));
            }
        }
        if self.r <= 0.0 {
            return Err(GeometryError::InvalidSpec("R must be positive".into()));
        }
        for (name, v) in &fields[1..5] {
            if *v < 0.0 {
                return Err(GeometryError::InvalidSpec(format!("{name} must be non-negative")));
            }
        }
        let l_bc = semi_arc_length(self.l_total, self.l_clamp, self.l_joint_arm);
        if l_bc <= 0.0 {
            return Err(GeometryError::InvalidSpec(format!(
                "L_total ({}) must exceed L_clamp + 2·L_joint_arm ({})",
                self.l_total,
                self.l_clamp + 2.0 * self.l_joint_arm
            )));
        }
        if l_bc <= 2.0 * self.r {
            return Err(GeometryError::InvalidSpec(format!(
                "L_bc ({l_bc}) must exceed 2R ({})",
                2.0 * self.r
            )));
        }
        Ok(())
    }
}

/// Derived loop quantities for one spec.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopGeometry {
    /// Lateral loop width D.
    pub width: f64,
    /// Semi-arc-to-clamp length L(b-c).
    pub l_bc: f64,
    pub x_max: f64,
    pub x_allow: f64,
}

fn semi_arc_length(l_total: f64, l_clamp: f64, l_joint_arm: f64) -> f64 {
    (l_total - l_clamp) / 2.0 - l_joint_arm
}

/// Lateral width of the loop: D = (L_total + d)/2 − πR + 2R.
pub fn compute_loop_width(spec: &LeafSpringSpec) -> Result<f64, GeometryError> {
    spec.validate()?;
    let width = (spec.l_total + spec.d) / 2.0 - PI * spec.r + 2.0 * spec.r;
    if width < 2.0 * spec.r {
        return Err(GeometryError::InvalidSpec(format!(
            "loop width {width} is below 2R = {}; the straight segments would have negative length",
            2.0 * spec.r
        )));
    }
    Ok(width)
}

/// Inverse of [`compute_loop_width`]: the joint distance that yields width `width`.
pub fn compute_joint_distance(width: f64, l_total: f64, r: f64) -> Result<f64, GeometryError> {
    if !(width > 0.0 && l_total > 0.0 && r > 0.0) || !(width.is_finite() && l_total.is_finite() && r.is_finite()) {
        return Err(GeometryError::InvalidSpec("D, L_total and R must be positive".into()));
    }
    let d = 2.0 * (width - 2.0 * r + PI * r) - l_total;
    if d < 0.0 {
        return Err(GeometryError::InvalidSpec(format!(
            "width {width} needs a negative joint distance ({d}) for L_total = {l_total}"
        )));
    }
    Ok(d)
}

/// Maximum displacement when the spring is pulled straight:
/// X_max = sqrt(L_bc² − 4R²) − X0 with L_bc = (L_total − L_clamp)/2 − L_joint_arm.
pub fn compute_x_max(spec: &LeafSpringSpec) -> Result<f64, GeometryError> {
    spec.validate()?;
    let l_bc = semi_arc_length(spec.l_total, spec.l_clamp, spec.l_joint_arm);
    let x_max = (l_bc * l_bc - 4.0 * spec.r * spec.r).sqrt() - spec.x0;
    if x_max <= 0.0 {
        return Err(GeometryError::InvalidSpec(format!("maximum displacement {x_max} is not positive")));
    }
    Ok(x_max)
}

pub fn allowable_displacement(x_max: f64) -> f64 {
    ALLOWABLE_FRACTION * x_max
}

/// Full loop analysis of a spec.
pub fn analyze(spec: &LeafSpringSpec) -> Result<LoopGeometry, GeometryError> {
    let width = compute_loop_width(spec)?;
    let x_max = compute_x_max(spec)?;
    Ok(LoopGeometry {
        width,
        l_bc: semi_arc_length(spec.l_total, spec.l_clamp, spec.l_joint_arm),
        x_max,
        x_allow: allowable_displacement(x_max),
    })
}

/// Inclusive `min:step:max` grid for one spec field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldRange {
    pub min: f64,
    pub step: f64,
    pub max: f64,
}

impl FieldRange {
    pub fn fixed(v: f64) -> Self {
        Self { min: v, step: 1.0, max: v }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.min.is_finite() && self.step.is_finite() && self.max.is_finite()) {
            return Err("range bounds must be finite".into());
        }
        if self.step <= 0.0 {
            return Err("step must be positive".into());
        }
        if self.max < self.min {
            return Err("max is below min".into());
        }
        Ok(())
    }

    /// Grid values; points are `min + i·step` so no drift accumulates.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.min + i as f64 * self.step).collect()
    }
}

impl FromStr for FieldRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}"));
        let range = match parts.as_slice() {
            [v] => Self::fixed(num(v)?),
            [min, step, max] => Self { min: num(min)?, step: num(step)?, max: num(max)? },
            _ => return Err("expected `value` or `min:step:max`".into()),
        };
        range.validate()?;
        Ok(range)
    }
}

/// One grid range per spec field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignRanges {
    pub r: FieldRange,
    pub l_total: FieldRange,
    pub d: FieldRange,
    pub l_clamp: FieldRange,
    pub l_joint_arm: FieldRange,
    pub x0: FieldRange,
}

impl DesignRanges {
    /// Ranges pinned to a single spec.
    pub fn pinned(spec: &LeafSpringSpec) -> Self {
        Self {
            r: FieldRange::fixed(spec.r),
            l_total: FieldRange::fixed(spec.l_total),
            d: FieldRange::fixed(spec.d),
            l_clamp: FieldRange::fixed(spec.l_clamp),
            l_joint_arm: FieldRange::fixed(spec.l_joint_arm),
            x0: FieldRange::fixed(spec.x0),
        }
    }

    /// Overrides fields from a `R=10:1:20,L_total=150:10:200` style spec.
    /// Field names match the CSV columns without the unit suffix.
    pub fn parse_overrides(mut self, spec: &str) -> Result<Self, GeometryError> {
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, range) = item
                .split_once('=')
                .ok_or_else(|| GeometryError::InvalidRange(item.into(), "expected `field=min:step:max`".into()))?;
            let range: FieldRange = range.parse().map_err(|e| GeometryError::InvalidRange(item.into(), e))?;
            let slot = match name.trim() {
                "R" => &mut self.r,
                "L_total" => &mut self.l_total,
                "d" => &mut self.d,
                "L_clamp" => &mut self.l_clamp,
                "L_joint_arm" => &mut self.l_joint_arm,
                "X0" => &mut self.x0,
                other => {
                    return Err(GeometryError::InvalidRange(item.into(), format!("unknown field `{other}`")))
                }
            };
            *slot = range;
        }
        Ok(self)
    }

    fn all(&self) -> [&FieldRange; 6] {
        [&self.r, &self.l_total, &self.d, &self.l_clamp, &self.l_joint_arm, &self.x0]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DesignConstraints {
    /// Largest acceptable loop width.
    pub max_width: Option<f64>,
    /// Smallest acceptable allowable displacement.
    pub min_x_allow: Option<f64>,
}

/// Enumerates the grid, keeping valid specs that meet the constraints,
/// sorted by allowable displacement (largest first).
pub fn sweep_designs(
    ranges: &DesignRanges,
    constraints: &DesignConstraints,
) -> Result<Vec<(LeafSpringSpec, LoopGeometry)>, GeometryError> {
    for r in ranges.all() {
        r.validate().map_err(|e| GeometryError::InvalidRange(format!("{r:?}"), e))?;
    }
    let mut out = Vec::new();
    for &r in &ranges.r.values() {
        for &l_total in &ranges.l_total.values() {
            for &d in &ranges.d.values() {
                for &l_clamp in &ranges.l_clamp.values() {
                    for &l_joint_arm in &ranges.l_joint_arm.values() {
                        for &x0 in &ranges.x0.values() {
                            let spec = LeafSpringSpec { r, l_total, d, l_clamp, l_joint_arm, x0 };
                            let Ok(geom) = analyze(&spec) else { continue };
                            if constraints.max_width.is_some_and(|m| geom.width > m) {
                                continue;
                            }
                            if constraints.min_x_allow.is_some_and(|m| geom.x_allow < m) {
                                continue;
                            }
                            out.push((spec, geom));
                        }
                    }
                }
            }
        }
    }
    // Stable sort keeps grid order among ties.
    out.sort_by(|a, b| b.1.x_allow.total_cmp(&a.1.x_allow));
    Ok(out)
}

/// Header of the design CSV report.
pub const CSV_HEADER: &str =
    "R_mm,L_total_mm,d_mm,L_clamp_mm,L_joint_arm_mm,X0_mm,D_mm,L_bc_mm,X_max_mm,X_allow_mm";

pub fn csv_row(spec: &LeafSpringSpec, geom: &LoopGeometry) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        spec.r, spec.l_total, spec.d, spec.l_clamp, spec.l_joint_arm, spec.x0, geom.width, geom.l_bc, geom.x_max, geom.x_allow
    )
}
