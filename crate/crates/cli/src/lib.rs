//! Command-line frontend: configuration ingestion, the synthesis pipeline,
//! controller evaluation, the built-in demo experiment and machine-readable
//! reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use error::CliError;
