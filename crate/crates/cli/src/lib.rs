//! Driver for the `twistlab` command: configuration layering and the subcommands.

pub mod commands;
pub mod config;
