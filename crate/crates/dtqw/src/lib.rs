//! Momentum-space simulator for discrete-time quantum walks with step-dependent coins.

pub mod cli;
pub mod error;
pub mod linalg;
pub mod protocol;
pub mod spectrum;
pub mod symmetry;
pub mod topology;

pub use error::{Error, Result};
