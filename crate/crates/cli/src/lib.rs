//! Command-line front end: configuration files, presets, subcommands and
//! output formats.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod presets;
