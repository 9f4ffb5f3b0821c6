//! Configuration parsing, experiment drivers and plot output for the
//! `nmsse` command-line tool.

pub mod commands;
pub mod config;
pub mod svg;

pub use commands::{cmd_ensemble, cmd_figure1, cmd_kernels, cmd_oracle_check, cmd_spread, Check, CommandError, Outcome};
pub use config::{parse_config, ConfigError, Formats, RunConfig, TimeSpacing};
