pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod sensing;
pub mod signal;
pub mod solver;
pub mod trackers;

pub use error::{Error, Result};
