//! Simulation and analysis toolkit for a warm-vapor spontaneous four-wave
//! mixing photon-pair source: vapor and geometry models, the detected-rate
//! budget, biphoton waveforms, Monte Carlo timestamp streams and
//! correlation histograms.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod biphoton;
pub mod budget;
pub mod cli;
pub mod config;
pub mod consts;
pub mod correlate;
pub mod error;
pub mod exec;
pub mod format;
pub mod geometry;
pub mod montecarlo;
pub mod sweep;
pub mod vapor;

pub use error::{Error, Result};
pub use exec::Exec;
