//! Epoch loop, early stopping and run configuration.

mod config;
mod inputs;

use std::time::Instant;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geograph::{build_graph, normalize_adjacency, Graph, NormAdj};
use crate::griddata::{
    fill_missing, make_windows, split_dataset, Dataset, SampleIndex, SplitRanges, Standardizer,
};
use crate::model::{forward_batch, init_params, loss_and_gradients, ModelConfig, ModelParams};
use crate::numcore::{clip_global_norm, AdamConfig, AdamState};

pub use config::{load_run_config, parse_run_config, TrainConfig, DEFAULT_HORIZONS};
pub use inputs::{ModelInputs, TargetScale};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Validation MSE of the initial weights.
    pub initial_val_mse: f64,
    pub epochs: Vec<EpochRecord>,
    /// Epoch (1-based) whose parameters were kept.
    pub selected_epoch: usize,
}

impl TrainHistory {
    pub fn best_val_mse(&self) -> f64 {
        self.epochs[self.selected_epoch - 1].val_mse
    }

    pub fn final_val_mse(&self) -> f64 {
        self.epochs.last().map_or(self.initial_val_mse, |e| e.val_mse)
    }

    /// Per-epoch losses without timings; two runs of the same config agree on this exactly.
    pub fn losses(&self) -> Vec<(usize, f64, f64)> {
        self.epochs
            .iter()
            .map(|e| (e.epoch, e.train_mse, e.val_mse))
            .collect()
    }

    /// Tab-separated log: header, then `epoch train_mse val_mse seconds`.
    pub fn to_log(&self) -> String {
        let mut out = String::from("epoch\ttrain_mse\tval_mse\tseconds\n");
        for e in &self.epochs {
            out.push_str(&log_line(e));
        }
        out
    }
}

pub fn log_line(e: &EpochRecord) -> String {
    format!("{}\t{:.8}\t{:.8}\t{:.3}\n", e.epoch, e.train_mse, e.val_mse, e.seconds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Progress {
    Improved,
    Stalled,
    Stop,
}

/// Stops once the validation loss has failed to improve for more than `patience` epochs in a row.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    bad: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            bad: 0,
        }
    }

    pub fn update(&mut self, val: f64) -> Progress {
        if val < self.best {
            self.best = val;
            self.bad = 0;
            Progress::Improved
        } else {
            self.bad += 1;
            if self.bad > self.patience {
                Progress::Stop
            } else {
                Progress::Stalled
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ModelConfig,
    pub params: ModelParams,
    pub history: TrainHistory,
}

const EVAL_CHUNK: usize = 256;

/// Predictions for every anchor of `index`, in anchor order.
pub fn predict(
    inputs: &ModelInputs,
    index: &SampleIndex,
    adj: &NormAdj,
    params: &ModelParams,
    model: &ModelConfig,
    threads: usize,
) -> Result<Vec<crate::numcore::Matrix>> {
    let mut out = Vec::with_capacity(index.len());
    for chunk in index.anchors.chunks(EVAL_CHUNK) {
        let windows: Vec<_> = chunk
            .iter()
            .map(|&a| inputs.window(a, index.window))
            .collect();
        out.extend(forward_batch(&windows, adj, params, model, threads)?);
    }
    Ok(out)
}

/// Mean squared error over all samples, nodes and horizons, in standardized units.
pub fn evaluate_mse(
    inputs: &ModelInputs,
    index: &SampleIndex,
    adj: &NormAdj,
    params: &ModelParams,
    model: &ModelConfig,
    threads: usize,
) -> Result<f64> {
    if index.is_empty() {
        return Err(Error::Window("no samples to evaluate".into()));
    }
    let preds = predict(inputs, index, adj, params, model, threads)?;
    let mut sum = 0.0;
    for (&a, p) in index.anchors.iter().zip(&preds) {
        let t = inputs.target_matrix(a, &index.horizons);
        sum += p.zip_map(&t, |x, y| x - y)?.sum_sq();
    }
    Ok(sum / (index.len() * inputs.n_nodes() * index.horizons.len()) as f64)
}

/// Trains on `train` anchors and selects the parameters with the lowest
/// validation MSE. Nothing outside the two indices is read.
pub fn run_training(
    inputs: &ModelInputs,
    adj: &NormAdj,
    cfg: &TrainConfig,
    train: &SampleIndex,
    val: &SampleIndex,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let model = cfg.model_config(inputs.n_features());
    if train.is_empty() || val.is_empty() {
        return Err(Error::Window("training needs train and validation samples".into()));
    }
    if train.window != model.window || train.horizons != model.horizons {
        return Err(Error::Window("sample index does not match the config".into()));
    }
    let mut params = init_params(&model, cfg.seed)?;
    let mut adam = AdamState::new(&params, AdamConfig::with_learning_rate(cfg.learning_rate));
    let initial_val_mse = evaluate_mse(inputs, val, adj, &params, &model, cfg.threads)?;
    info!("initial validation mse {initial_val_mse:.6}");

    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = params.clone();
    let mut selected = 0;
    let mut epochs = Vec::new();
    let mut order = train.anchors.clone();
    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed(cfg.seed, epoch));
        order.copy_from_slice(&train.anchors);
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<_> = chunk.iter().map(|&a| inputs.sample(a, train)).collect();
            let diverged = |loss: f64| Error::Divergence {
                epoch,
                batch: b,
                loss,
            };
            let (loss, mut grads) =
                loss_and_gradients(&batch, adj, &params, &model).map_err(|e| match e {
                    Error::NonFinite(_) => diverged(f64::NAN),
                    other => other,
                })?;
            clip_global_norm(&mut grads, cfg.clip_norm);
            adam.step(&mut params, &grads).map_err(|_| diverged(loss))?;
            weighted += loss * chunk.len() as f64;
        }
        let train_mse = weighted / order.len() as f64;
        let val_mse = evaluate_mse(inputs, val, adj, &params, &model, cfg.threads).map_err(|e| {
            match e {
                Error::NonFinite(_) => Error::Divergence {
                    epoch,
                    batch: order.len().div_ceil(cfg.batch_size),
                    loss: f64::NAN,
                },
                other => other,
            }
        })?;
        let record = EpochRecord {
            epoch,
            train_mse,
            val_mse,
            seconds: started.elapsed().as_secs_f64(),
        };
        debug!("epoch {epoch}: train {train_mse:.6} val {val_mse:.6}");
        on_epoch(&record);
        epochs.push(record);
        match stopper.update(val_mse) {
            Progress::Improved => {
                best = params.clone();
                selected = epoch;
            }
            Progress::Stalled => {}
            Progress::Stop => {
                info!("early stop after epoch {epoch}");
                break;
            }
        }
    }
    Ok(TrainOutcome {
        model,
        params: best,
        history: TrainHistory {
            initial_val_mse,
            epochs,
            selected_epoch: selected,
        },
    })
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// A dataset prepared for one configuration: resampled to the run stride,
/// filled, split, standardized on train and cut into windows.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub dataset: Dataset,
    pub graph: Graph,
    pub adj: NormAdj,
    pub splits: SplitRanges,
    pub standardizer: Standardizer,
    pub inputs: ModelInputs,
    pub train: SampleIndex,
    pub val: SampleIndex,
    pub test: SampleIndex,
}

impl Experiment {
    pub fn prepare(raw: &Dataset, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let dataset = resample(raw, cfg.stride_hours)?;
        let graph = build_graph(dataset.domain(), cfg.dist_km)?;
        let dataset = fill_missing(&dataset, &graph)?;
        let adj = normalize_adjacency(&graph);
        let splits = split_dataset(&dataset, &cfg.split)?;
        let standardizer = Standardizer::fit(&dataset, splits.train.clone())?;
        let inputs = ModelInputs::from_dataset(&dataset, &standardizer)?;
        let (w, hs) = (cfg.window_steps(), cfg.horizon_steps());
        let train = make_windows(splits.train.clone(), w, &hs)?;
        let val = make_windows(splits.val.clone(), w, &hs)?;
        let test = make_windows(splits.test.clone(), w, &hs)?;
        Ok(Experiment {
            dataset,
            graph,
            adj,
            splits,
            standardizer,
            inputs,
            train,
            val,
            test,
        })
    }

    /// The same run with other node features, e.g. reduced embeddings.
    pub fn with_inputs(mut self, inputs: ModelInputs) -> Result<Self> {
        if inputs.n_times() != self.inputs.n_times() || inputs.n_nodes() != self.inputs.n_nodes() {
            return Err(Error::shape(
                "Experiment::with_inputs",
                format!(
                    "{}x{} inputs for a {}x{} experiment",
                    inputs.n_times(),
                    inputs.n_nodes(),
                    self.inputs.n_times(),
                    self.inputs.n_nodes()
                ),
            ));
        }
        self.inputs = inputs;
        Ok(self)
    }

    pub fn train(&self, cfg: &TrainConfig, on_epoch: impl FnMut(&EpochRecord)) -> Result<TrainOutcome> {
        run_training(&self.inputs, &self.adj, cfg, &self.train, &self.val, on_epoch)
    }
}

/// Returns the dataset at `stride_hours`, keeping every k-th step of a finer record.
pub fn resample(d: &Dataset, stride_hours: u32) -> Result<Dataset> {
    let have = d.stride_hours();
    if have == stride_hours {
        return Ok(d.clone());
    }
    if stride_hours % have != 0 {
        return Err(Error::Stride(format!(
            "cannot resample {have}h data to a {stride_hours}h stride"
        )));
    }
    d.subsample((stride_hours / have) as usize)
}
