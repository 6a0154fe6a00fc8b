//! File formats and command-line front end for `mfmclust-core`.
//!
//! Subcommands compose into a pipeline: `simulate` writes a count table with
//! known groups, `fit` runs seeded chains and writes draws files plus a
//! manifest, `summarize` pools the draws into point estimates, and `eval`
//! scores estimates against the truth.

pub mod commands;
pub mod config;
pub mod draws;
pub mod error;
pub mod newick;
pub mod output;
pub mod table;

pub use commands::{eval, fit, simulate, summarize, EvalArgs, Manifest, SimulateConfig, Summary};
pub use config::{Model, RunConfig, ScaleSetting};
pub use error::{CliError, CliResult};
