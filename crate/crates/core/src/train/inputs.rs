use chrono::Timelike;

use crate::error::{Error, Result};
use crate::griddata::{Dataset, SampleIndex, Standardizer};
use crate::model::Sample;
use crate::numcore::Matrix;

/// Physical scale of the standardized target: `kelvin = z * std + mean`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TargetScale {
    pub mean: f64,
    pub std: f64,
}

impl TargetScale {
    pub fn from_standardizer(s: &Standardizer, var: usize) -> Self {
        let (mean, std) = s.scale_of(var);
        TargetScale { mean, std }
    }

    pub fn to_kelvin(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }

    pub fn to_celsius(&self, z: f64) -> f64 {
        self.to_kelvin(z) - 273.15
    }
}

/// Standardized node features and targets ready for the model.
///
/// `features` is `T x N x F`, `target` is `T x N` (standardized t2m).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInputs {
    n_times: usize,
    n_nodes: usize,
    n_features: usize,
    features: Vec<f64>,
    target: Vec<f64>,
    scale: TargetScale,
    hours_of_day: Vec<u32>,
}

impl ModelInputs {
    /// Standardizes every variable of a filled dataset; t2m doubles as the target.
    pub fn from_dataset(d: &Dataset, standardizer: &Standardizer) -> Result<Self> {
        if standardizer.n_vars() != d.n_vars() {
            return Err(Error::shape(
                "ModelInputs::from_dataset",
                format!(
                    "standardizer has {} variables, dataset {}",
                    standardizer.n_vars(),
                    d.n_vars()
                ),
            ));
        }
        if d.missing_count() > 0 {
            return Err(Error::Fill("model inputs need a filled dataset".into()));
        }
        let features = standardizer.apply(d.values());
        let k = d.target_index();
        let target = features.chunks_exact(d.n_vars()).map(|r| r[k]).collect();
        ModelInputs::new(
            d.n_nodes(),
            d.n_vars(),
            features,
            target,
            TargetScale::from_standardizer(standardizer, k),
            hours_of_day(d),
        )
    }

    pub fn new(
        n_nodes: usize,
        n_features: usize,
        features: Vec<f64>,
        target: Vec<f64>,
        scale: TargetScale,
        hours_of_day: Vec<u32>,
    ) -> Result<Self> {
        let n_times = hours_of_day.len();
        if features.len() != n_times * n_nodes * n_features || target.len() != n_times * n_nodes {
            return Err(Error::shape(
                "ModelInputs::new",
                format!(
                    "{} features / {} targets for T={n_times}, N={n_nodes}, F={n_features}",
                    features.len(),
                    target.len()
                ),
            ));
        }
        if features.iter().chain(&target).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model inputs".into()));
        }
        Ok(ModelInputs {
            n_times,
            n_nodes,
            n_features,
            features,
            target,
            scale,
            hours_of_day,
        })
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }
    pub fn n_features(&self) -> usize {
        self.n_features
    }
    pub fn scale(&self) -> TargetScale {
        self.scale
    }
    pub fn hour_of_day(&self, t: usize) -> u32 {
        self.hours_of_day[t]
    }

    /// Standardized target at `(t, node)`.
    pub fn target(&self, t: usize, node: usize) -> f64 {
        self.target[t * self.n_nodes + node]
    }

    pub fn features_at(&self, t: usize) -> Matrix {
        let block = self.n_nodes * self.n_features;
        Matrix::from_vec(
            self.n_nodes,
            self.n_features,
            self.features[t * block..(t + 1) * block].to_vec(),
        )
        .expect("finite by construction")
    }

    /// Input window ending at `anchor`, oldest first.
    pub fn window(&self, anchor: usize, len: usize) -> Vec<Matrix> {
        (anchor + 1 - len..=anchor)
            .map(|t| self.features_at(t))
            .collect()
    }

    /// Targets of `anchor` as `N x K`.
    pub fn target_matrix(&self, anchor: usize, horizons: &[usize]) -> Matrix {
        let mut m = Matrix::zeros(self.n_nodes, horizons.len());
        for (k, &h) in horizons.iter().enumerate() {
            for n in 0..self.n_nodes {
                m.set(n, k, self.target(anchor + h, n));
            }
        }
        m
    }

    pub fn sample(&self, anchor: usize, index: &SampleIndex) -> Sample {
        Sample {
            window: self.window(anchor, index.window),
            target: self.target_matrix(anchor, &index.horizons),
        }
    }
}

fn hours_of_day(d: &Dataset) -> Vec<u32> {
    (0..d.n_times()).map(|t| d.timestamp(t).hour()).collect()
}
