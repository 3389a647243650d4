//! Six-component value types shared by every model in the crate.
//!
//! Translations are millimeters and rotations are degrees throughout; forces
//! are newtons and torques newton-meters. All three types serialize as flat
//! six-element JSON arrays.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, Index, IndexMut, Neg, Sub};

/// Component index shared by poses, deflections and wrenches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
    Roll,
    Pitch,
    Yaw,
}

impl Axis {
    pub const ALL: [Axis; 6] = [Axis::X, Axis::Y, Axis::Z, Axis::Roll, Axis::Pitch, Axis::Yaw];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_rotation(self) -> bool {
        matches!(self, Axis::Roll | Axis::Pitch | Axis::Yaw)
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
            Axis::Roll => "roll",
            Axis::Pitch => "pitch",
            Axis::Yaw => "yaw",
        }
    }

    /// Label of the matching wrench component ("fx" .. "tz").
    pub fn wrench_label(self) -> &'static str {
        match self {
            Axis::X => "fx",
            Axis::Y => "fy",
            Axis::Z => "fz",
            Axis::Roll => "tx",
            Axis::Pitch => "ty",
            Axis::Yaw => "tz",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Axis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown axis `{s}` (expected x|y|z|roll|pitch|yaw)"))
    }
}

macro_rules! six_vector {
    ($(#[$meta:meta])* $name:ident { $f0:ident, $f1:ident, $f2:ident, $f3:ident, $f4:ident, $f5:ident }) => {
        six_vector!(@impl $(#[$meta])* $name [$f0, $f1, $f2, $f3, $f4, $f5] $f0 $f1 $f2 $f3 $f4 $f5);
    };
    (@impl $(#[$meta:meta])* $name:ident [$($field:ident),+] $f0:ident $f1:ident $f2:ident $f3:ident $f4:ident $f5:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
        #[serde(from = "[f64; 6]", into = "[f64; 6]")]
        pub struct $name {
            $(pub $field: f64,)+
        }

        impl $name {
            pub const ZERO: Self = Self { $($field: 0.0,)+ };

            pub fn from_array(a: [f64; 6]) -> Self {
                let [$($field),+] = a;
                Self { $($field,)+ }
            }

            pub fn to_array(self) -> [f64; 6] {
                [$(self.$field),+]
            }

            pub fn is_finite(&self) -> bool {
                $(self.$field.is_finite())&&+
            }

            pub fn map(self, f: impl Fn(f64) -> f64) -> Self {
                Self { $($field: f(self.$field),)+ }
            }
        }

        impl From<[f64; 6]> for $name {
            fn from(a: [f64; 6]) -> Self {
                Self::from_array(a)
            }
        }

        impl From<$name> for [f64; 6] {
            fn from(v: $name) -> Self {
                v.to_array()
            }
        }

        impl Index<Axis> for $name {
            type Output = f64;

            fn index(&self, axis: Axis) -> &f64 {
                match axis {
                    Axis::X => &self.$f0,
                    Axis::Y => &self.$f1,
                    Axis::Z => &self.$f2,
                    Axis::Roll => &self.$f3,
                    Axis::Pitch => &self.$f4,
                    Axis::Yaw => &self.$f5,
                }
            }
        }

        impl IndexMut<Axis> for $name {
            fn index_mut(&mut self, axis: Axis) -> &mut f64 {
                match axis {
                    Axis::X => &mut self.$f0,
                    Axis::Y => &mut self.$f1,
                    Axis::Z => &mut self.$f2,
                    Axis::Roll => &mut self.$f3,
                    Axis::Pitch => &mut self.$f4,
                    Axis::Yaw => &mut self.$f5,
                }
            }
        }

        impl Add for $name {
            type Output = Self;

            fn add(self, o: Self) -> Self {
                Self { $($field: self.$field + o.$field,)+ }
            }
        }

        impl Sub for $name {
            type Output = Self;

            fn sub(self, o: Self) -> Self {
                Self { $($field: self.$field - o.$field,)+ }
            }
        }

        impl Neg for $name {
            type Output = Self;

            fn neg(self) -> Self {
                Self { $($field: -self.$field,)+ }
            }
        }
    };
}

six_vector!(
    /// Cartesian pose of the tool center point: x, y, z in mm; roll, pitch, yaw in degrees.
    Pose6 { x, y, z, roll, pitch, yaw }
);

six_vector!(
    /// Wrist deflection relative to the unloaded wrist frame.
    ///
    /// Positive `z` is compression (the finger unit pushed toward the flange).
    Deflection6 { x, y, z, roll, pitch, yaw }
);

six_vector!(
    /// Force (N) and torque (N·m) pair.
    Wrench6 { fx, fy, fz, tx, ty, tz }
);

impl Wrench6 {
    /// Euclidean norm of the force part.
    pub fn force_norm(&self) -> f64 {
        (self.fx * self.fx + self.fy * self.fy + self.fz * self.fz).sqrt()
    }

    pub fn scale(self, s: f64) -> Self {
        self.map(|v| v * s)
    }
}
