//! File formats, configuration and subcommands of the `modpair` executable.
//!
//! Every command is a function of its flags, input files and seed. Outputs are
//! written atomically (temporary file, then rename) and each successful
//! command leaves a run manifest beside its primary output.
//!
//! Seeds are split by name: a command's `--seed` is mixed with a fixed label
//! per consumer (`"init"` for parameters, `"batches"` for the schedule,
//! `"probes"` for probe sampling, ...), so consumers never share a stream.

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod pipeline;

pub use error::CliError;
