//! Core of the smart-home explanation testbed: scenario documents, the
//! deterministic world simulation, explanation delivery, the append-only
//! event log and the session service that ties them together.

pub mod literal;
pub mod scenario;
pub mod sim;
pub mod explain;
pub mod log;
pub mod session;
pub mod bot;

pub use literal::{Literal, LiteralKind};
