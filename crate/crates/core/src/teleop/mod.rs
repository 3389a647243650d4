//! Bilateral teleoperation: the wire codec, the follower session and
//! episode recording and replay.

mod codec;
mod log;
mod session;

pub use codec::*;
pub use log::*;
pub use session::*;
