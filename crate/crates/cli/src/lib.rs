//! Library half of the `steklov-trace` binary: configuration, CSV output
//! and the six commands.

pub mod commands;
pub mod config;
pub mod format;

pub use commands::{run, Audit, CommandError, CommandOutput};
pub use config::{CommandName, ConfigError, RawConfig, RunConfig};

/// Version string written into every output header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
