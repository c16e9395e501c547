//! Pipeline driver for the FOV-constrained impact-time guidance core: file
//! formats, configuration, run manifests, multi-threaded sweeps, SVG plots and
//! the subcommands of the `fovguide` binary.

pub mod audit;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod parallel;
pub mod plot;

pub use error::{Error, Result};
