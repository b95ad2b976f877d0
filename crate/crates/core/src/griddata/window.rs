use std::ops::Range;

use crate::error::{Error, Result};

/// Forecast samples inside one split.
///
/// An anchor `t` owns the input window `[t - window + 1, t]` and targets at
/// `t + h` for every horizon `h`; all of them stay inside the split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleIndex {
    pub window: usize,
    pub horizons: Vec<usize>,
    pub anchors: Vec<usize>,
}

impl SampleIndex {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn max_horizon(&self) -> usize {
        *self.horizons.last().unwrap()
    }

    /// First timestep of the input window ending at `anchor`.
    pub fn window_start(&self, anchor: usize) -> usize {
        anchor + 1 - self.window
    }
}

/// Enumerates anchors in `range`; windows and horizons are in timesteps.
pub fn make_windows(range: Range<usize>, window: usize, horizons: &[usize]) -> Result<SampleIndex> {
    if window == 0 {
        return Err(Error::Window("window must be at least one step".into()));
    }
    if horizons.is_empty() || horizons[0] == 0 || horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Window(format!(
            "horizons must be positive and strictly ascending: {horizons:?}"
        )));
    }
    let max_h = *horizons.last().unwrap();
    let len = range.len();
    if len < window + max_h {
        return Err(Error::Window(format!(
            "split of {len} steps is shorter than window {window} + horizon {max_h}"
        )));
    }
    let first = range.start + window - 1;
    let last = range.end - 1 - max_h;
    Ok(SampleIndex {
        window,
        horizons: horizons.to_vec(),
        anchors: (first..=last).collect(),
    })
}
