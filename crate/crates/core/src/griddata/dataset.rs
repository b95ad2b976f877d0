use chrono::{Duration, NaiveDateTime};

use crate::error::{Error, Result};
use crate::griddata::{validate_variables, GridDomain, Variable};

/// Sanity bounds for 2 m temperature in Kelvin.
pub const T2M_SANITY_K: (f64, f64) = (180.0, 340.0);

/// A gridded record of surface fields: `values[t][node][var]`, row-major.
///
/// Missing cells hold NaN in `values` and `true` in the mask. The record is
/// immutable once built; transformations return new datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    domain: GridDomain,
    variables: Vec<Variable>,
    start: NaiveDateTime,
    stride_hours: u32,
    n_times: usize,
    values: Vec<f64>,
    missing: Vec<bool>,
}

impl Dataset {
    /// Builds a dataset. Non-finite entries in `values` are treated as missing.
    pub fn new(
        domain: GridDomain,
        variables: Vec<Variable>,
        start: NaiveDateTime,
        stride_hours: u32,
        n_times: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        validate_variables(&variables)?;
        if stride_hours == 0 {
            return Err(Error::Stride("stride must be at least one hour".into()));
        }
        if n_times == 0 {
            return Err(Error::format("dataset", "no timestamps"));
        }
        let expected = n_times * domain.node_count() * variables.len();
        if values.len() != expected {
            return Err(Error::format(
                "dataset",
                format!(
                    "{} values, expected T={n_times} x N={} x F={}",
                    values.len(),
                    domain.node_count(),
                    variables.len()
                ),
            ));
        }
        let mut values = values;
        let missing: Vec<bool> = values.iter().map(|v| !v.is_finite()).collect();
        for v in values.iter_mut().filter(|v| !v.is_finite()) {
            *v = f64::NAN;
        }
        let ds = Dataset {
            domain,
            variables,
            start,
            stride_hours,
            n_times,
            values,
            missing,
        };
        ds.check_t2m_bounds()?;
        Ok(ds)
    }

    fn check_t2m_bounds(&self) -> Result<()> {
        let k = self.target_index();
        let f = self.n_vars();
        for (i, chunk) in self.values.chunks(f).enumerate() {
            let v = chunk[k];
            if v.is_finite() && !(T2M_SANITY_K.0..=T2M_SANITY_K.1).contains(&v) {
                return Err(Error::format(
                    "dataset",
                    format!(
                        "t2m {v} K outside sanity bounds at t={}, node={}",
                        i / self.n_nodes(),
                        i % self.n_nodes()
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }
    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }
    pub fn start(&self) -> NaiveDateTime {
        self.start
    }
    pub fn stride_hours(&self) -> u32 {
        self.stride_hours
    }
    pub fn n_times(&self) -> usize {
        self.n_times
    }
    pub fn n_nodes(&self) -> usize {
        self.domain.node_count()
    }
    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn missing_mask(&self) -> &[bool] {
        &self.missing
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    pub fn var_index(&self, var: Variable) -> Option<usize> {
        self.variables.iter().position(|&v| v == var)
    }

    pub fn target_index(&self) -> usize {
        self.var_index(Variable::T2m)
            .expect("t2m presence is a construction invariant")
    }

    #[inline]
    pub fn offset(&self, t: usize, node: usize, var: usize) -> usize {
        (t * self.n_nodes() + node) * self.n_vars() + var
    }

    #[inline]
    pub fn value(&self, t: usize, node: usize, var: usize) -> f64 {
        self.values[self.offset(t, node, var)]
    }

    #[inline]
    pub fn is_missing(&self, t: usize, node: usize, var: usize) -> bool {
        self.missing[self.offset(t, node, var)]
    }

    /// The `N x F` block at timestep `t`.
    pub fn timestep(&self, t: usize) -> &[f64] {
        let block = self.n_nodes() * self.n_vars();
        &self.values[t * block..(t + 1) * block]
    }

    pub fn timestamp(&self, t: usize) -> NaiveDateTime {
        self.start + Duration::hours(t as i64 * self.stride_hours as i64)
    }

    /// Index of `ts` if it falls exactly on the record's time axis.
    pub fn time_index(&self, ts: NaiveDateTime) -> Option<usize> {
        let hours = (ts - self.start).num_hours();
        if hours < 0 || (ts - self.start) != Duration::hours(hours) {
            return None;
        }
        let stride = self.stride_hours as i64;
        (hours % stride == 0)
            .then(|| (hours / stride) as usize)
            .filter(|&t| t < self.n_times)
    }

    /// Values of one variable at all `(t, node)` cells, `T x N` row-major.
    pub fn variable_series(&self, var: usize) -> Vec<f64> {
        self.values
            .chunks(self.n_vars())
            .map(|c| c[var])
            .collect()
    }

    /// Keeps every `factor`-th timestep, starting at the first.
    pub fn subsample(&self, factor: usize) -> Result<Dataset> {
        if factor == 0 {
            return Err(Error::Stride("subsample factor must be positive".into()));
        }
        let block = self.n_nodes() * self.n_vars();
        let keep: Vec<usize> = (0..self.n_times).step_by(factor).collect();
        let mut values = Vec::with_capacity(keep.len() * block);
        for &t in &keep {
            values.extend_from_slice(self.timestep(t));
        }
        Dataset::new(
            self.domain,
            self.variables.clone(),
            self.start,
            self.stride_hours * factor as u32,
            keep.len(),
            values,
        )
    }

    /// Replaces the value array, recomputing the missing mask.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Result<Dataset> {
        Dataset::new(
            self.domain,
            self.variables.clone(),
            self.start,
            self.stride_hours,
            self.n_times,
            values,
        )
    }
}
