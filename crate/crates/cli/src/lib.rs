//! Batch front end: configuration, command tables and output files.

pub mod commands;
pub mod config;
pub mod output;
pub mod selftest;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] copolymer::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
