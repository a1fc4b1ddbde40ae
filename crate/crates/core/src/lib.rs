//! Discrete-event simulator and analytical queueing model for three-layer
//! IoT, fog and cloud networks with threshold-based fog offloading.

pub mod analytic;
pub mod cli;
pub mod error;
pub mod model;
pub mod policy;
pub mod sim;
pub mod topology;

pub use error::{Error, Result};
