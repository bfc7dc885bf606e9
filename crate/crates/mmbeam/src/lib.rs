//! Experiment harness for hybrid beam search: configuration, Monte Carlo
//! driver, file formats and the dominance probe.

pub mod config;
pub mod error;
pub mod harness;
pub mod io;
pub mod probe;

pub use config::{ExperimentConfig, Method, Scoring};
pub use error::{HarnessError, Result};
pub use harness::{run_experiment, summarize, ResultRow, SummaryRow};
