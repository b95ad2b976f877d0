use std::ops::Range;

use crate::error::{Error, Result};
use crate::evalreport::{compute_metrics, EvalReport, Forecasts};
use crate::griddata::SampleIndex;
use crate::model::{init_params, ModelParams};
use crate::train::{predict, Experiment, ModelInputs, TrainConfig};

/// Every horizon repeats the last value of the input window.
pub fn persistence_baseline(inputs: &ModelInputs, index: &SampleIndex) -> Forecasts {
    let n = inputs.n_nodes();
    let k = index.horizons.len();
    let mut values = Vec::with_capacity(index.len() * k * n);
    for &a in &index.anchors {
        for _ in 0..k {
            values.extend((0..n).map(|i| inputs.target(a, i)));
        }
    }
    Forecasts::new(index.len(), k, n, values).expect("sized above")
}

/// Per-node mean target for each hour of the day.
#[derive(Debug, Clone, PartialEq)]
pub struct Climatology {
    n_nodes: usize,
    /// `24 x N`, `None` where the hour never occurs in the fitting range.
    means: Vec<Option<Vec<f64>>>,
}

impl Climatology {
    pub fn fit(inputs: &ModelInputs, train: Range<usize>) -> Result<Self> {
        if train.is_empty() || train.end > inputs.n_times() {
            return Err(Error::Eval(format!("climatology needs a non-empty train range, got {train:?}")));
        }
        let n = inputs.n_nodes();
        let mut sums = vec![vec![0.0; n]; 24];
        let mut counts = [0usize; 24];
        for t in train {
            let h = inputs.hour_of_day(t) as usize;
            counts[h] += 1;
            for (i, s) in sums[h].iter_mut().enumerate() {
                *s += inputs.target(t, i);
            }
        }
        let means = sums
            .into_iter()
            .zip(counts)
            .map(|(s, c)| (c > 0).then(|| s.into_iter().map(|v| v / c as f64).collect()))
            .collect();
        Ok(Climatology { n_nodes: n, means })
    }

    pub fn mean(&self, hour: u32, node: usize) -> Option<f64> {
        self.means[hour as usize].as_ref().map(|m| m[node])
    }

    /// Forecasts keyed by the hour of day at each target time.
    pub fn predict(&self, inputs: &ModelInputs, index: &SampleIndex) -> Result<Forecasts> {
        let n = self.n_nodes;
        let mut values = Vec::with_capacity(index.len() * index.horizons.len() * n);
        for &a in &index.anchors {
            for &h in &index.horizons {
                let hour = inputs.hour_of_day(a + h);
                let m = self.means[hour as usize].as_ref().ok_or_else(|| {
                    Error::Eval(format!("no training data at {hour:02}:00 for climatology"))
                })?;
                values.extend_from_slice(m);
            }
        }
        Forecasts::new(index.len(), index.horizons.len(), n, values)
    }
}

pub fn climatology_baseline(
    inputs: &ModelInputs,
    train: Range<usize>,
    index: &SampleIndex,
) -> Result<Forecasts> {
    Climatology::fit(inputs, train)?.predict(inputs, index)
}

/// Scores trained parameters on the test split.
pub fn evaluate_model(
    ex: &Experiment,
    cfg: &TrainConfig,
    params: &ModelParams,
    label: &str,
) -> Result<EvalReport> {
    let model = cfg.model_config(ex.inputs.n_features());
    let preds = predict(&ex.inputs, &ex.test, &ex.adj, params, &model, cfg.threads)?;
    compute_metrics(
        &Forecasts::from_predictions(&preds)?,
        &Forecasts::targets(&ex.inputs, &ex.test),
        ex.inputs.scale(),
        &cfg.horizons,
        label,
    )
}

/// The untrained model at `cfg.seed`, flagged as the control.
pub fn control_model_eval(ex: &Experiment, cfg: &TrainConfig) -> Result<EvalReport> {
    let params = init_params(&cfg.model_config(ex.inputs.n_features()), cfg.seed)?;
    let mut r = evaluate_model(ex, cfg, &params, "control (random weights)")?;
    r.control = true;
    Ok(r)
}

/// Persistence and climatology scores on the test split.
pub fn baseline_reports(ex: &Experiment, cfg: &TrainConfig) -> Result<Vec<EvalReport>> {
    let target = Forecasts::targets(&ex.inputs, &ex.test);
    let scale = ex.inputs.scale();
    let persistence = persistence_baseline(&ex.inputs, &ex.test);
    let clim = climatology_baseline(&ex.inputs, ex.splits.train.clone(), &ex.test)?;
    Ok(vec![
        compute_metrics(&persistence, &target, scale, &cfg.horizons, "persistence")?,
        compute_metrics(&clim, &target, scale, &cfg.horizons, "climatology")?,
    ])
}
