use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::griddata::Dataset;

/// Floor applied to per-variable standard deviations.
pub const STD_EPSILON: f64 = 1e-8;

/// Per-variable affine scaling fitted on the training range.
///
/// Uses the population standard deviation (divide by count).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Fits on `train` timesteps over all nodes of a filled dataset.
    pub fn fit(d: &Dataset, train: Range<usize>) -> Result<Self> {
        if train.is_empty() || train.end > d.n_times() {
            return Err(Error::Split(format!(
                "training range {train:?} is empty or exceeds {} timesteps",
                d.n_times()
            )));
        }
        if d.missing_count() > 0 {
            return Err(Error::Fill(
                "standardizer needs a filled dataset".into(),
            ));
        }
        let f = d.n_vars();
        let rows = d.values()[train.start * d.n_nodes() * f..train.end * d.n_nodes() * f]
            .chunks_exact(f);
        Ok(Standardizer::fit_rows(rows, f))
    }

    /// Fits on an iterator of feature rows, each of length `f`.
    pub fn fit_rows<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, f: usize) -> Self {
        let mut mean = vec![0.0; f];
        let mut count = 0usize;
        for r in rows.clone() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
            count += 1;
        }
        for m in &mut mean {
            *m /= count.max(1) as f64;
        }
        let mut var = vec![0.0; f];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .iter()
            .map(|s| (s / count.max(1) as f64).sqrt().max(STD_EPSILON))
            .collect();
        Standardizer { mean, std }
    }

    pub fn n_vars(&self) -> usize {
        self.mean.len()
    }

    /// Standardizes rows of length `n_vars` in place.
    pub fn apply_in_place(&self, values: &mut [f64]) {
        let f = self.n_vars();
        for row in values.chunks_exact_mut(f) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
    }

    pub fn invert_in_place(&self, values: &mut [f64]) {
        let f = self.n_vars();
        for row in values.chunks_exact_mut(f) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * s + m;
            }
        }
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        let mut out = values.to_vec();
        self.apply_in_place(&mut out);
        out
    }

    pub fn invert(&self, values: &[f64]) -> Vec<f64> {
        let mut out = values.to_vec();
        self.invert_in_place(&mut out);
        out
    }

    /// Scale of one variable: physical = standardized * std + mean.
    pub fn scale_of(&self, var: usize) -> (f64, f64) {
        (self.mean[var], self.std[var])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::griddata::{GridDomain, Variable};
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn ds(values: Vec<f64>, vars: Vec<Variable>, n_times: usize) -> Dataset {
        let dom = GridDomain::region_a(2, 2).unwrap();
        let start = NaiveDate::from_ymd_opt(2022, 1, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        Dataset::new(dom, vars, start, 1, n_times, values).unwrap()
    }

    #[test]
    fn population_std() {
        // One timestep of 4 nodes; values 201..204 are {1,2,3,4} shifted by 200.
        let d = ds(vec![201.0, 202.0, 203.0, 204.0], vec![Variable::T2m], 1);
        let s = Standardizer::fit(&d, 0..1).unwrap();
        assert!((s.mean[0] - 202.5).abs() < 1e-12);
        // population: sqrt(1.25); the sample convention would give sqrt(5/3)
        assert!((s.std[0] - 1.25f64.sqrt()).abs() < 1e-12);
        assert!((s.std[0] - (5.0f64 / 3.0).sqrt()).abs() > 1e-3);
    }

    #[test]
    fn constant_variable_gets_floor() {
        let d = ds(
            vec![290.0, 5.0, 291.0, 5.0, 292.0, 5.0, 293.0, 5.0],
            vec![Variable::T2m, Variable::Orog],
            1,
        );
        let s = Standardizer::fit(&d, 0..1).unwrap();
        assert_eq!(s.mean[1], 5.0);
        assert_eq!(s.std[1], STD_EPSILON);
    }

    #[test]
    fn uses_training_range_only() {
        let mut v = vec![280.0; 4];
        v.extend([330.0; 4]);
        let d = ds(v, vec![Variable::T2m], 2);
        let s = Standardizer::fit(&d, 0..1).unwrap();
        assert_eq!(s.mean[0], 280.0);
        assert!(Standardizer::fit(&d, 1..1).is_err());
    }

    #[test]
    fn standardized_training_data_has_unit_moments() {
        let vals: Vec<f64> = (0..24).map(|i| 250.0 + (i as f64 * 1.7).sin() * 20.0).collect();
        let d = ds(vals, vec![Variable::T2m], 6);
        let s = Standardizer::fit(&d, 0..4).unwrap();
        let z = s.apply(&d.values()[..16]);
        let m = z.iter().sum::<f64>() / 16.0;
        let sd = (z.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 16.0).sqrt();
        assert!(m.abs() < 1e-8);
        assert!((sd - 1.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn round_trip(rows in prop::collection::vec(prop::collection::vec(-1e4f64..1e4, 3), 2..40)) {
            let flat: Vec<f64> = rows.concat();
            let s = Standardizer::fit_rows(flat.chunks_exact(3), 3);
            let back = s.invert(&s.apply(&flat));
            for (a, b) in flat.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
            }
        }
    }
}
