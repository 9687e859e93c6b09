//! Command-line driver: configuration files, CSV tables, run manifests and
//! the `run`, `sweep` and `oracle` commands.

pub mod commands;
pub mod config;
pub mod csv_io;
pub mod manifest;
pub mod oracle;
