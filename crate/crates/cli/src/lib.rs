//! Configuration, presets and command execution behind the `hypfield`
//! binary.

pub mod config;
pub mod presets;
pub mod run;

pub use config::{ConfigError, RunConfig, Sources};
pub use run::{run, Command, RunError};
