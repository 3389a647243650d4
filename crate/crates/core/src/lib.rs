//! Simulation and design toolkit for a leaf-spring soft wrist with
//! switchable stiffness.

pub mod contact;
pub mod controller;
pub mod equilibrium;
pub mod geometry;
pub mod lockstate;
pub mod scenario;
pub mod teleop;
pub mod types;
pub mod wristmodel;

pub use lockstate::StiffnessMode;
pub use types::{Axis, Deflection6, Pose6, Wrench6};
