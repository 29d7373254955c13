//! Configuration, commands and file formats of the `qtensor` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

pub use commands::{cmd_contraction, cmd_eigen, cmd_linearize, cmd_simulate, cmd_verify, resolve_out_dir};
pub use config::{load_config, parse_config, SimConfig};

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "QTENSOR_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: parse error: {0}")]
    Parse(String),
    #[error("config: invalid `{key}`: {reason}")]
    Validation { key: String, reason: String },
    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error("qtensor: {0}")]
    Core(#[from] qtensor::Error),
}
