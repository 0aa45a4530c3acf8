//! Experiment harness around the `telekin` library: the latency and
//! accuracy characterization runs and the teleoperation demo, each emitting
//! CSV traces, a report, a human summary, and a resolved-config snapshot.

pub mod accuracy;
pub mod config;
pub mod latency;
pub mod output;
pub mod teleop;

pub use config::{ConfigError, Mode, RunConfig};
pub use output::{write_artifacts, RunArtifacts};
