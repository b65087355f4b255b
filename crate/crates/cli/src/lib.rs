//! Batch command-line surface for the `spkver` library.

pub mod cli;
pub mod commands;
pub mod config;
