//! Experiment orchestration: configuration, closed-loop runs, metrics and
//! sweeps.

pub mod config;
pub mod metrics;
pub mod run;
pub mod sweep;

pub use config::ExperimentConfig;
pub use metrics::{compute_metrics, MetricsReport};
pub use run::{prepare_bank, run_closed_loop, RunOutput, RunRecord, RunRow};
pub use sweep::{sweep_regions, SweepRow};
