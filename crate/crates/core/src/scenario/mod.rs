//! Quasi-static contact scenarios: peg-in-hole, door handle and wall touch.

mod config;
mod door;
mod script;
mod sim;
mod sweep;

pub use config::*;
pub use door::*;
pub use script::*;
pub use sim::*;
pub use sweep::*;
