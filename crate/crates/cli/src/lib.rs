//! Command-line front end: configuration, output files and the subcommands
//! `ingest`, `generate`, `fit`, `simulate`, `metrics`, `vaccinate` and
//! `pipeline`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod output;

pub use cli::{run, Cli};
pub use config::ExperimentConfig;
