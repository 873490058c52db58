//! Experiment harness: configuration, event generation, regimes, metrics and sweeps.

pub mod config;
pub mod events;
pub mod metrics;
pub mod sweep;
pub mod task;

pub use config::{DatasetSource, Regime, RunConfig};
pub use events::{check_regime, generate, Schedule};
pub use metrics::{baseline_majority, class_accuracy, forgetting_rate, micro_f1};
pub use sweep::{sweep, SweepRow, SweepTable, AXES};
pub use task::{load_graph, run, run_task, schedule, MetricsReport, TimestampMetrics};
