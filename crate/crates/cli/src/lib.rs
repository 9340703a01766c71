//! Configuration, execution and report output behind the `favsites` binary.
pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{AuditSpec, ExperimentConfig, Format};
pub use error::{exit, CliError};
pub use output::emit_report;
pub use run::{run_experiment, RunManifest};
