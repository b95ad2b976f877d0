//! Spatiotemporal graph forecasting of gridded 2 m air temperature.
//!
//! Grid points become graph nodes joined within a distance threshold.
//! Graph convolutions mix neighbouring features at each timestep, a shared
//! GRU runs along each node's sequence, and one linear head per lead time
//! predicts temperature 1 to 48 hours ahead.

#[cfg(feature = "cli")]
pub mod cli;
pub mod embedpath;
pub mod error;
pub mod evalreport;
pub mod fsutil;
pub mod geograph;
pub mod griddata;
pub mod model;
pub mod numcore;
pub mod train;

pub use error::{Error, Result};
