//! Teleoperation service for the simulated hexapod.
//!
//! [`Session`] runs the closed loop one frame at a time. [`serve`] wraps it in
//! a fixed-rate loop and exposes it over HTTP: `GET /status` returns the
//! latest STATUS payload and `/ws` carries the JSON protocol in [`protocol`].

pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{Direction, Mode, OperatorMessage, ServerMessage};
pub use server::{serve, ServeOptions, ServerHandle};
pub use session::{ImageMode, Session, SessionConfig, SessionError, TickOutput};
