//! Subcommand implementations behind the `rfsense` binary.

pub mod commands;
pub mod manifest;
pub mod metrics;
pub mod plot;

pub use commands::*;
