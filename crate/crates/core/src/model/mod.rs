//! The graph-convolution + GRU forecaster.
//!
//! Per input timestep, `L` graph convolutions (rectifier after each) map the
//! `N x F` node features to `N x HD`. A GRU with weights shared across nodes
//! then runs along the window for every node, and the final hidden state
//! feeds one linear head per forecast horizon. Horizons share the trunk and
//! are trained jointly.
//!
//! Tensors use the row-vector convention: node states are rows, so a layer
//! is `X · W + b`.

mod checkpoint;
mod forward;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{Matrix, Parameters};

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use forward::{
    forward, forward_batch, forward_cached, gcn_layer, gru_cell, loss_and_gradients, ForwardCache,
    Sample,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_features: usize,
    pub hidden: usize,
    pub gcn_layers: usize,
    /// Input window length in timesteps.
    pub window: usize,
    /// Forecast offsets in timesteps, strictly ascending.
    pub horizons: Vec<usize>,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("n_features", self.n_features),
            ("hidden", self.hidden),
            ("gcn_layers", self.gcn_layers),
            ("window", self.window),
        ] {
            if v == 0 {
                return Err(Error::config(key, "must be at least 1"));
            }
        }
        if self.horizons.is_empty()
            || self.horizons[0] == 0
            || self.horizons.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::config(
                "horizons",
                format!("{:?} must be positive and ascending", self.horizons),
            ));
        }
        Ok(())
    }

    pub fn n_horizons(&self) -> usize {
        self.horizons.len()
    }
}

/// GRU gate weights. `w_*` act on the input, `u_*` on the previous state.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub w_z: Matrix,
    pub u_z: Matrix,
    pub b_z: Matrix,
    pub w_r: Matrix,
    pub u_r: Matrix,
    pub b_r: Matrix,
    pub w_h: Matrix,
    pub u_h: Matrix,
    pub b_h: Matrix,
}

impl GruParams {
    fn zeros(hd: usize) -> Self {
        let sq = || Matrix::zeros(hd, hd);
        let row = || Matrix::zeros(1, hd);
        GruParams {
            w_z: sq(),
            u_z: sq(),
            b_z: row(),
            w_r: sq(),
            u_r: sq(),
            b_r: row(),
            w_h: sq(),
            u_h: sq(),
            b_h: row(),
        }
    }

    fn tensors(&self) -> [&Matrix; 9] {
        [
            &self.w_z, &self.u_z, &self.b_z, &self.w_r, &self.u_r, &self.b_r, &self.w_h,
            &self.u_h, &self.b_h,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Matrix; 9] {
        [
            &mut self.w_z,
            &mut self.u_z,
            &mut self.b_z,
            &mut self.w_r,
            &mut self.u_r,
            &mut self.b_r,
            &mut self.w_h,
            &mut self.u_h,
            &mut self.b_h,
        ]
    }
}

const GRU_NAMES: [&str; 9] = [
    "gru.w_z", "gru.u_z", "gru.b_z", "gru.w_r", "gru.u_r", "gru.b_r", "gru.w_h", "gru.u_h",
    "gru.b_h",
];

/// All trainable tensors. Column `k` of `head_w` (and entry `k` of `head_b`) is the head for horizon `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub gcn_w: Vec<Matrix>,
    pub gcn_b: Vec<Matrix>,
    pub gru: GruParams,
    pub head_w: Matrix,
    pub head_b: Matrix,
}

impl ModelParams {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let hd = cfg.hidden;
        let gcn_w = (0..cfg.gcn_layers)
            .map(|l| Matrix::zeros(if l == 0 { cfg.n_features } else { hd }, hd))
            .collect();
        let gcn_b = (0..cfg.gcn_layers).map(|_| Matrix::zeros(1, hd)).collect();
        ModelParams {
            gcn_w,
            gcn_b,
            gru: GruParams::zeros(hd),
            head_w: Matrix::zeros(hd, cfg.n_horizons()),
            head_b: Matrix::zeros(1, cfg.n_horizons()),
        }
    }

    /// Tensor names in declaration order, matching [`Parameters::tensors`].
    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for l in 0..self.gcn_w.len() {
            names.push(format!("gcn.{l}.w"));
            names.push(format!("gcn.{l}.b"));
        }
        names.extend(GRU_NAMES.iter().map(|s| s.to_string()));
        names.push("head.w".into());
        names.push("head.b".into());
        names
    }

    /// Fan-in used to scale the initial range of each tensor, in declaration order.
    fn fan_ins(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for w in &self.gcn_w {
            out.push(w.rows());
            out.push(w.rows());
        }
        let hd = self.gru.w_z.rows();
        out.extend([hd; 9]);
        out.push(self.head_w.rows());
        out.push(self.head_w.rows());
        out
    }

    /// True when every tensor has the shape `cfg` implies.
    pub fn matches(&self, cfg: &ModelConfig) -> bool {
        let want = ModelParams::zeros(cfg);
        self.tensors().len() == want.tensors().len()
            && self
                .tensors()
                .iter()
                .zip(want.tensors())
                .all(|(a, b)| a.shape() == b.shape())
    }
}

impl Parameters for ModelParams {
    fn tensors(&self) -> Vec<&Matrix> {
        let mut out = Vec::with_capacity(2 * self.gcn_w.len() + 11);
        for (w, b) in self.gcn_w.iter().zip(&self.gcn_b) {
            out.push(w);
            out.push(b);
        }
        out.extend(self.gru.tensors());
        out.push(&self.head_w);
        out.push(&self.head_b);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = Vec::with_capacity(2 * self.gcn_w.len() + 11);
        for (w, b) in self.gcn_w.iter_mut().zip(self.gcn_b.iter_mut()) {
            out.push(w);
            out.push(b);
        }
        out.extend(self.gru.tensors_mut());
        out.push(&mut self.head_w);
        out.push(&mut self.head_b);
        out
    }
}

/// Uniform initialization in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, deterministic per seed.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> Result<ModelParams> {
    cfg.validate()?;
    let mut params = ModelParams::zeros(cfg);
    let fans = params.fan_ins();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (t, fan) in params.tensors_mut().into_iter().zip(fans) {
        let bound = 1.0 / (fan as f64).sqrt();
        for v in t.as_mut_slice() {
            *v = rng.random_range(-bound..=bound);
        }
    }
    Ok(params)
}
