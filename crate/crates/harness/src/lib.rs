//! Experiment harness: configuration, data files, deterministic training,
//! checkpoints, evaluation and ablation grids.

pub mod ablate;
pub mod checkpoint;
pub mod config;
pub mod error;
pub mod eval;
pub mod io;
pub mod manifest;
pub mod optim;
pub mod train;

pub use config::{ExperimentConfig, Precision, Preset};
pub use error::{Error, Result};
