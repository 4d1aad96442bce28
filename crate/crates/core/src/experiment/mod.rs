//! Parameter sweeps over the metrics, figure presets, and the CSV result
//! table with its invariant checks.

pub mod check;
pub mod config;
pub mod preset;
pub mod run;

pub use check::{check_rows, CheckOutcome, CheckReport};
pub use config::{ExperimentConfig, MetricKind, SCHEMA_VERSION};
pub use preset::{figure_preset, PRESET_NAMES};
pub use run::{any_failure, read_csv, run, write_csv, ResultRow, RowStatus};
