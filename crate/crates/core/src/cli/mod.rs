//! Sweep driver behind the `optomech-sweep` binary.

pub mod config;
pub mod output;
pub mod sweep;

pub use config::{parse_config, ConfigError, Mode, SweepConfig};
pub use output::{write_outputs, ResultRow};
pub use sweep::{run_sweep, SweepOutcome};
