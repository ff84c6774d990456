//! Library surface of the harness: configuration parsing, output
//! formatting, and the subcommand runners. The binary in `main.rs` is a
//! thin clap wrapper over these.

pub mod config;
pub mod format;
pub mod runners;
