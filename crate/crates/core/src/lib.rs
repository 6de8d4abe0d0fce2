//! Dead reckoning for quadrotors on periodic trajectories: strapdown
//! mechanization, trajectory and IMU simulation, windowed datasets, 1D CNN
//! position regressors and chained evaluation.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod csvio;
pub mod dataset;
pub mod deadreckon;
pub mod error;
pub mod experiment;
pub mod ins;
pub mod nn;
pub mod plot;
pub mod trajectory;

pub use error::{Error, Result};
