//! Configuration, orchestration and output for the `srd` command.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{Outcome, Overrides, PlotKind};
pub use config::{parse_config, parse_config_str, ConfigErrors, RunConfig};
