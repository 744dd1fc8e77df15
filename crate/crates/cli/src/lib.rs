//! Configuration, file formats and pipeline orchestration behind the
//! `fmcw` command-line tool.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod io;
pub mod number;
pub mod pipeline;

pub use config::{load_config, parse_config, PipelineConfig};
pub use error::{CliError, EXIT_CONFIG, EXIT_STAGE};
pub use pipeline::{run_pipeline, Manifest};
