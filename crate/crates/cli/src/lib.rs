//! IO, file formats, and the command-line pipeline around `mobridge-core`.
//!
//! Subcommands: `simulate`, `metrics`, `mobius`, `permtest`, `reliability`,
//! `uniformity`, `ablation`, `suite`, `demo`. Exit codes: 0 success,
//! 2 input error, 3 internal numeric error.

pub mod cli;
pub mod error;
pub mod heatmap;
pub mod parallel;
pub mod report;
pub mod shotfile;
pub mod suite;

pub use error::CliError;
