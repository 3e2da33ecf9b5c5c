//! Epoch-based coexistence simulator for a primary cellular network and an
//! underlay secondary network, plus the NARX cognitive engine that lets each
//! secondary transmitter pick a power level from a short probe sweep.
//!
//! The crate is `no_std` (with `alloc`); file IO, configuration and the
//! command-line driver live in `underlay-sim`. All floating-point math goes
//! through [`math`] (backed by `libm`) so results are bit-identical across
//! targets.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod amc;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod math;
pub mod narx;
pub mod power_control;
pub mod radio_env;
pub mod rng;

pub use error::{Error, Result};
