//! File formats, the parallel experiment runner and the `underlay` command
//! line on top of `underlay-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod runner;

pub use error::{Result, SimError};
