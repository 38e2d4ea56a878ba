//! Precise clustering of protein sequences by bottom-up cluster merging.

pub mod alignment;
pub mod alphabet;
pub mod cluster;
pub mod dist;
pub mod error;
pub mod eval;
pub mod format;
pub mod sequence;
pub mod shared;
pub mod synth;

pub use error::{Error, Result};
