//! File formats, dataset directories, run configuration and the command-line
//! front end around `fundus-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod netpbm;
pub mod pipeline;
pub mod report;

pub use error::{Error, Result};
