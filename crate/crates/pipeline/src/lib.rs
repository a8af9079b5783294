//! Experiment orchestration: configuration, datasets, identification runs,
//! sweeps and reports.

pub mod config;
pub mod demo;
pub mod emit;
pub mod error;
pub mod filter;
pub mod io;
pub mod report;
pub mod run;
pub mod sweep;

pub use error::{PipelineError, Result};
