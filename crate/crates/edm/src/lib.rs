//! File formats, run configuration, sweeps and the command-line front end
//! around [`edm_core`].

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod envspec;
mod error;
pub mod export;
pub mod pipeline;
pub mod report;
pub mod text;

pub use error::{Error, Result};
