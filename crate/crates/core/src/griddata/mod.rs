//! Gridded surface data: domain geometry, the dataset record, file formats,
//! missing-value fill, standardization, splits, sample windows and the
//! synthetic generator.

mod dataset;
mod domain;
mod fill;
pub mod io;
mod split;
mod standardize;
mod synth;
mod window;

pub use dataset::{Dataset, T2M_SANITY_K};
pub use domain::{validate_variables, GridDomain, LatLon, Variable};
pub use fill::fill_missing;
pub use io::{load_dataset, save_dataset, DataFormat};
pub use split::{split_dataset, split_len, SplitRanges, SplitSpec};
pub use standardize::{Standardizer, STD_EPSILON};
pub use synth::{generate_synthetic, SynthConfig};
pub use window::{make_windows, SampleIndex};
