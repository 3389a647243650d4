//! Pin-carrier lock mechanism.
//!
//! One actuator drives a carrier holding four pins. The carrier is modeled as
//! a linear axis: −1 seats the two slot-shaped pins (X joints), 0 leaves
//! every joint free, +1 seats all four pins. Switching between the two
//! locked positions therefore passes through the free position.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StiffnessMode {
    #[default]
    Free,
    HalfLock,
    FullLock,
}

impl StiffnessMode {
    pub const ALL: [StiffnessMode; 3] = [StiffnessMode::Free, StiffnessMode::HalfLock, StiffnessMode::FullLock];

    pub fn as_str(self) -> &'static str {
        match self {
            StiffnessMode::Free => "free",
            StiffnessMode::HalfLock => "half_lock",
            StiffnessMode::FullLock => "full_lock",
        }
    }

    /// Carrier position at which this mode's pins are seated.
    pub fn carrier_position(self) -> f64 {
        match self {
            StiffnessMode::Free => 0.0,
            StiffnessMode::HalfLock => -1.0,
            StiffnessMode::FullLock => 1.0,
        }
    }

    pub fn engaged_joints(self) -> BTreeSet<Joint> {
        match self {
            StiffnessMode::Free => BTreeSet::new(),
            StiffnessMode::HalfLock => [Joint::XPlus, Joint::XMinus].into(),
            StiffnessMode::FullLock => [Joint::XPlus, Joint::XMinus, Joint::YPlus, Joint::YMinus].into(),
        }
    }
}

impl fmt::Display for StiffnessMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StiffnessMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StiffnessMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown stiffness mode `{s}` (expected free|half_lock|full_lock)"))
    }
}

/// Rotary joints of the two leaf springs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Joint {
    XPlus,
    XMinus,
    YPlus,
    YMinus,
}

/// Axes whose stiffness a mode raises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LockedAxis {
    X,
    Y,
    Yaw,
}

/// Free locks nothing, half-lock restrains X, full-lock restrains X, Y and yaw.
/// Z, roll and pitch are never locked.
pub fn locked_axes(mode: StiffnessMode) -> BTreeSet<LockedAxis> {
    match mode {
        StiffnessMode::Free => BTreeSet::new(),
        StiffnessMode::HalfLock => [LockedAxis::X].into(),
        StiffnessMode::FullLock => [LockedAxis::X, LockedAxis::Y, LockedAxis::Yaw].into(),
    }
}

/// Carrier travel per second. Free to full-lock takes 0.25 s.
pub const DEFAULT_CARRIER_RATE: f64 = 4.0;

// Snap tolerance so accumulated float steps land exactly on a seat.
const SEAT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LockState {
    pub carrier_position: f64,
    pub mode: StiffnessMode,
    /// Mode the carrier is moving toward.
    pub target: StiffnessMode,
    pub carrier_rate: f64,
}

impl Default for LockState {
    fn default() -> Self {
        Self::seated(StiffnessMode::Free)
    }
}

impl LockState {
    /// Carrier at rest in `mode`.
    pub fn seated(mode: StiffnessMode) -> Self {
        Self { carrier_position: mode.carrier_position(), mode, target: mode, carrier_rate: DEFAULT_CARRIER_RATE }
    }

    pub fn with_rate(mut self, rate: f64) -> Self {
        self.carrier_rate = rate;
        self
    }

    pub fn engaged_joints(&self) -> BTreeSet<Joint> {
        self.mode.engaged_joints()
    }

    pub fn in_transit(&self) -> bool {
        self.carrier_position != self.target.carrier_position()
    }

    /// Checks the seat table: at each seat position the mode is that seat's
    /// mode, and at rest the carrier sits on the mode's seat.
    pub fn check_invariants(&self) -> Result<(), String> {
        if !(-1.0..=1.0).contains(&self.carrier_position) {
            return Err(format!("carrier position {} outside [-1, 1]", self.carrier_position));
        }
        for m in StiffnessMode::ALL {
            if self.carrier_position == m.carrier_position() && self.mode != m {
                return Err(format!("carrier seated at {} but mode is {}", self.carrier_position, self.mode));
            }
        }
        if !self.in_transit() && self.mode != self.target {
            return Err(format!("carrier at rest but mode {} differs from target {}", self.mode, self.target));
        }
        Ok(())
    }
}

/// Advances the carrier toward `target` for `dt` seconds.
///
/// The mode changes only when the carrier lands on a seat; crossing the free
/// seat on the way between the two locked seats sets the mode to free.
pub fn command_mode(current: &LockState, target: StiffnessMode, dt: f64) -> LockState {
    let mut next = current.clone();
    next.target = target;
    if dt <= 0.0 {
        return next;
    }
    let goal = target.carrier_position();
    let start = current.carrier_position;
    if start == goal {
        next.mode = target;
        return next;
    }
    let travel = current.carrier_rate * dt;
    let remaining = goal - start;
    let pos = if remaining.abs() <= travel + SEAT_EPS { goal } else { start + travel.copysign(remaining) };

    // Crossing or touching the free seat strictly inside the path.
    let free_seat = StiffnessMode::Free.carrier_position();
    let crossed_free = start != free_seat && (start - free_seat).signum() != (pos - free_seat).signum();
    if crossed_free {
        next.mode = StiffnessMode::Free;
    }
    let pos = if (pos - free_seat).abs() <= SEAT_EPS { free_seat } else { pos };
    next.carrier_position = pos;
    if pos == goal {
        next.mode = target;
    } else if pos == free_seat {
        next.mode = StiffnessMode::Free;
    }
    next
}
