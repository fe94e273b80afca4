//! Experiment harness: config-driven matrix and tensor runs, the determinant
//! sign Monte Carlo, CSV persistence and SVG plots.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod csvio;
pub mod detsign;
pub mod error;
pub mod matfac_run;
pub mod plot;
pub mod record;
pub mod tenfac_sweep;

pub use config::{
    DetsignConfig, ExperimentConfig, MatfacConfig, MatfacRunSpec, PlotConfig, PlotStyle, TaskSpec, TenfacConfig,
};
pub use error::{HarnessError, Result};
pub use record::{run_id, RunRecord, RunSummary};
