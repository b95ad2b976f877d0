use std::ops::Range;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::griddata::Dataset;

/// How the record is cut into chronological train/validation/test parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SplitSpec {
    /// Validation starts at `val_start`, test at `test_start`; test runs to the end.
    Manual {
        val_start: NaiveDateTime,
        test_start: NaiveDateTime,
    },
    /// Fractions of the record length; the default is 70/15/15.
    Ratio { train: f64, val: f64, test: f64 },
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec::Ratio {
            train: 0.70,
            val: 0.15,
            test: 0.15,
        }
    }
}

/// Contiguous, disjoint, exhaustive index ranges over `[0, T)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRanges {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl SplitRanges {
    pub fn lens(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }
}

pub fn split_dataset(d: &Dataset, spec: &SplitSpec) -> Result<SplitRanges> {
    match spec {
        SplitSpec::Ratio { .. } => split_len(d.n_times(), spec),
        SplitSpec::Manual {
            val_start,
            test_start,
        } => {
            let locate = |ts: &NaiveDateTime, name: &str| {
                d.time_index(*ts).ok_or_else(|| {
                    Error::Split(format!(
                        "{name} boundary {ts} is not a timestamp of the record ({} .. {})",
                        d.timestamp(0),
                        d.timestamp(d.n_times() - 1)
                    ))
                })
            };
            let v = locate(val_start, "validation")?;
            let t = locate(test_start, "test")?;
            ranges_from_bounds(d.n_times(), v, t)
        }
    }
}

/// Ratio split of a record of length `n_times`.
///
/// train = floor(f_train T), val = floor(f_val T), test = the rest. When the
/// validation and test fractions are equal, one step moves from test to
/// validation whenever test would exceed validation by more than one.
pub fn split_len(n_times: usize, spec: &SplitSpec) -> Result<SplitRanges> {
    let SplitSpec::Ratio { train, val, test } = *spec else {
        return Err(Error::Split("manual splits need timestamps".into()));
    };
    if [train, val, test].iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
        return Err(Error::Split(format!(
            "fractions must lie in (0, 1): {train}, {val}, {test}"
        )));
    }
    if ((train + val + test) - 1.0).abs() > 1e-9 {
        return Err(Error::Split(format!(
            "fractions sum to {}, not 1",
            train + val + test
        )));
    }
    let t = n_times as f64;
    let n_train = (train * t + 1e-9).floor() as usize;
    let mut n_val = (val * t + 1e-9).floor() as usize;
    let n_test = n_times - n_train - n_val;
    if (val - test).abs() < 1e-12 && n_test > n_val + 1 {
        n_val += 1;
    }
    ranges_from_bounds(n_times, n_train, n_train + n_val)
}

fn ranges_from_bounds(n_times: usize, val_start: usize, test_start: usize) -> Result<SplitRanges> {
    let r = SplitRanges {
        train: 0..val_start,
        val: val_start..test_start,
        test: test_start..n_times,
    };
    if r.train.is_empty() || r.val.is_empty() || r.test.is_empty() {
        return Err(Error::Split(format!(
            "empty split: train {:?}, val {:?}, test {:?}",
            r.train, r.val, r.test
        )));
    }
    Ok(r)
}
