use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::griddata::SampleIndex;
use crate::numcore::Matrix;
use crate::train::{ModelInputs, TargetScale};

/// Standardized forecasts or targets laid out `samples x horizons x nodes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecasts {
    n_samples: usize,
    n_horizons: usize,
    n_nodes: usize,
    values: Vec<f64>,
}

impl Forecasts {
    pub fn new(n_samples: usize, n_horizons: usize, n_nodes: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_samples * n_horizons * n_nodes {
            return Err(Error::shape(
                "Forecasts::new",
                format!("{} values for {n_samples}x{n_horizons}x{n_nodes}", values.len()),
            ));
        }
        Ok(Forecasts {
            n_samples,
            n_horizons,
            n_nodes,
            values,
        })
    }

    /// Stacks per-sample `N x K` model outputs.
    pub fn from_predictions(preds: &[Matrix]) -> Result<Self> {
        let Some(first) = preds.first() else {
            return Forecasts::new(0, 0, 0, Vec::new());
        };
        let (n, k) = first.shape();
        let mut values = Vec::with_capacity(preds.len() * n * k);
        for p in preds {
            if p.shape() != (n, k) {
                return Err(Error::shape(
                    "Forecasts::from_predictions",
                    format!("{:?} after {:?}", p.shape(), (n, k)),
                ));
            }
            for h in 0..k {
                values.extend((0..n).map(|i| p.get(i, h)));
            }
        }
        Forecasts::new(preds.len(), k, n, values)
    }

    /// Observed targets for every anchor of `index`.
    pub fn targets(inputs: &ModelInputs, index: &SampleIndex) -> Self {
        let n = inputs.n_nodes();
        let mut values = Vec::with_capacity(index.len() * index.horizons.len() * n);
        for &a in &index.anchors {
            for &h in &index.horizons {
                values.extend((0..n).map(|i| inputs.target(a + h, i)));
            }
        }
        Forecasts::new(index.len(), index.horizons.len(), n, values).expect("sized above")
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }
    pub fn n_horizons(&self) -> usize {
        self.n_horizons
    }
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, sample: usize, horizon: usize, node: usize) -> f64 {
        self.values[(sample * self.n_horizons + horizon) * self.n_nodes + node]
    }

    fn shape(&self) -> (usize, usize, usize) {
        (self.n_samples, self.n_horizons, self.n_nodes)
    }
}

/// Verification scores in °C.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub label: String,
    /// Set for the untrained random-weight model.
    pub control: bool,
    pub horizons_hours: Vec<u32>,
    pub mae_c: Vec<f64>,
    pub rmse_c: Vec<f64>,
    /// Unweighted mean of `mae_c`.
    pub mean_mae_c: f64,
    pub node_mae_c: Vec<f64>,
    pub samples_per_horizon: Vec<usize>,
}

impl EvalReport {
    pub fn mae_at(&self, horizon_hours: u32) -> Option<f64> {
        let k = self.horizons_hours.iter().position(|&h| h == horizon_hours)?;
        Some(self.mae_c[k])
    }
}

fn check_aligned(pred: &Forecasts, target: &Forecasts) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(
            "compute_metrics",
            format!("predictions {:?} vs targets {:?}", pred.shape(), target.shape()),
        ));
    }
    if pred.n_samples == 0 || pred.n_nodes == 0 || pred.n_horizons == 0 {
        return Err(Error::Eval("empty test set".into()));
    }
    Ok(())
}

/// Both fields de-standardized to °C before differencing.
fn error_c(scale: TargetScale, p: f64, t: f64) -> f64 {
    scale.to_celsius(p) - scale.to_celsius(t)
}

/// Per-horizon MAE and RMSE, each over samples and nodes.
pub fn compute_metrics(
    pred: &Forecasts,
    target: &Forecasts,
    scale: TargetScale,
    horizons_hours: &[u32],
    label: &str,
) -> Result<EvalReport> {
    check_aligned(pred, target)?;
    if horizons_hours.len() != pred.n_horizons {
        return Err(Error::shape(
            "compute_metrics",
            format!("{} horizon labels for {} horizons", horizons_hours.len(), pred.n_horizons),
        ));
    }
    let (s_n, k_n, n_n) = pred.shape();
    let mut abs = vec![0.0; k_n];
    let mut sq = vec![0.0; k_n];
    for s in 0..s_n {
        for k in 0..k_n {
            for n in 0..n_n {
                let e = error_c(scale, pred.get(s, k, n), target.get(s, k, n));
                abs[k] += e.abs();
                sq[k] += e * e;
            }
        }
    }
    let count = (s_n * n_n) as f64;
    let mae_c: Vec<f64> = abs.iter().map(|a| a / count).collect();
    let rmse_c: Vec<f64> = sq.iter().map(|q| (q / count).sqrt()).collect();
    let mean_mae_c = mae_c.iter().sum::<f64>() / k_n as f64;
    let report = EvalReport {
        label: label.to_string(),
        control: false,
        horizons_hours: horizons_hours.to_vec(),
        mae_c,
        rmse_c,
        mean_mae_c,
        node_mae_c: nodewise_mae(pred, target, scale)?,
        samples_per_horizon: vec![s_n; k_n],
    };
    if !report.mean_mae_c.is_finite() || report.rmse_c.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("metrics".into()));
    }
    Ok(report)
}

/// Mean absolute error per node over samples and horizons, °C.
pub fn nodewise_mae(pred: &Forecasts, target: &Forecasts, scale: TargetScale) -> Result<Vec<f64>> {
    check_aligned(pred, target)?;
    let (s_n, k_n, n_n) = pred.shape();
    let mut acc = vec![0.0; n_n];
    for s in 0..s_n {
        for k in 0..k_n {
            for (n, a) in acc.iter_mut().enumerate() {
                *a += error_c(scale, pred.get(s, k, n), target.get(s, k, n)).abs();
            }
        }
    }
    let count = (s_n * k_n) as f64;
    Ok(acc.into_iter().map(|a| a / count).collect())
}
