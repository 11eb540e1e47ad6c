//! Experiment drivers: configuration, r-sweeps and event traces.

pub mod config;
pub mod sweep;
pub mod trace;

pub use config::{ExperimentConfig, InitSpec, Outputs};
pub use sweep::{run_sweep, SweepRow, SweepTable};
pub use trace::{record_trace, replay_trace, ReplayReport, TraceRecord};
