//! Planar co-manipulation test bench.

pub mod controllers;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod intent;
pub mod leader;
pub mod metrics;
pub mod session;
pub mod signals;

pub use error::{Error, Result};
