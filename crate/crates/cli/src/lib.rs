//! Batch front end for BCLP sinogram optimization: configuration, phantoms,
//! run and sweep drivers, and output files.

pub mod config;
pub mod error;
pub mod pgm;
pub mod phantom;
pub mod runner;

pub use config::RunConfig;
pub use error::{CliError, Result};
pub use runner::{run_single, run_sweep, RunSummary, SweepRow};
