//! Command-line front end: CSV ingestion, run configuration, model records and subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod record;
