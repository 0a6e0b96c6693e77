//! Policy and sensing agents and the joint training loop.

mod checks;
mod policy;
mod sensing;
mod train;

pub use checks::*;
pub use policy::*;
pub use sensing::*;
pub use train::*;

/// Training objective: cross-entropy alone, or cross-entropy traded
/// against the SINR of the received signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    P1,
    P2,
}
