//! File formats, configuration and the command-line driver around
//! `riskgraph-core`.
//!
//! * [`io`] JSONL graph files with file:line errors
//! * [`checkpoint`] byte-stable JSON checkpoints
//! * [`config`] flags over config file over defaults
//! * [`report`] text and CSV renderings
//! * [`smesd`] converter from a CSV export of the SME dataset
//! * [`commands`] the work behind each subcommand
//! * [`cli`] argument parsing

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod report;
pub mod smesd;

pub use error::{CliResult, DataError, Failure};
