//! Experiment runner for fractional-moment localization studies.

pub mod config;
pub mod error;
pub mod plot;
pub mod presets;
pub mod records;
pub mod runner;

pub use config::{load_config, parse_config, ExperimentConfig, Stage};
pub use error::{CliError, Result};
pub use records::{read_records, RecordKind, ResultRecord};
pub use runner::Run;
