//! Batch driver for the tsscale analysis chain: configuration, per-stage
//! subcommands, the full pipeline and its report.

pub mod commands;
pub mod config;
pub mod exit;
pub mod pipeline;
pub mod report;
pub mod stages;

pub use commands::{main_with_args, Cli};
pub use config::PipelineConfig;
pub use exit::CliError;
pub use pipeline::run_pipeline;
pub use report::PipelineReport;
