//! Run configuration, read from flat `key = value` files.
//!
//! | key | required | default |
//! |---|---|---|
//! | `learning_rate` | yes | |
//! | `batch_size` | yes | |
//! | `window_hours` | yes | |
//! | `dist_km` | yes | |
//! | `hidden_dim` | yes | |
//! | `gcn_layers` | no | 2 |
//! | `max_epochs` | no | 100 |
//! | `patience` | no | 10 |
//! | `seed` | no | 0 |
//! | `stride_hours` | no | 1 (1 or 6) |
//! | `horizons` | no | `1,6,12,18,24,36,48` minus offsets the stride cannot reach |
//! | `split` | no | `ratio` |
//! | `split_ratios` | with `split = ratio` | `0.70,0.15,0.15` |
//! | `val_start`, `test_start` | with `split = manual` | |
//! | `clip_norm` | no | 5.0 |
//! | `embed_components` | no | 6 |
//!
//! `#` starts a comment. Horizons and the window are in hours and must be
//! multiples of the stride.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::griddata::{io::format_timestamp, io::parse_timestamp, SplitSpec};
use crate::model::ModelConfig;

pub const DEFAULT_HORIZONS: [u32; 7] = [1, 6, 12, 18, 24, 36, 48];

const KEYS: [&str; 18] = [
    "learning_rate",
    "batch_size",
    "window_hours",
    "dist_km",
    "hidden_dim",
    "gcn_layers",
    "max_epochs",
    "patience",
    "seed",
    "stride_hours",
    "horizons",
    "split",
    "split_ratios",
    "val_start",
    "test_start",
    "clip_norm",
    "embed_components",
    "threads",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub window_hours: u32,
    pub dist_km: f64,
    pub hidden_dim: usize,
    pub gcn_layers: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub stride_hours: u32,
    pub horizons: Vec<u32>,
    pub split: SplitSpec,
    pub clip_norm: f64,
    pub embed_components: usize,
    /// Worker threads for batched prediction. Not read from files.
    #[serde(skip, default = "one")]
    pub threads: usize,
}

fn one() -> usize {
    1
}

impl TrainConfig {
    /// Config with the given required values and every default.
    pub fn new(
        learning_rate: f64,
        batch_size: usize,
        window_hours: u32,
        dist_km: f64,
        hidden_dim: usize,
    ) -> Self {
        TrainConfig {
            learning_rate,
            batch_size,
            window_hours,
            dist_km,
            hidden_dim,
            gcn_layers: 2,
            max_epochs: 100,
            patience: 10,
            seed: 0,
            stride_hours: 1,
            horizons: DEFAULT_HORIZONS.to_vec(),
            split: SplitSpec::default(),
            clip_norm: 5.0,
            embed_components: 6,
            threads: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive_f("learning_rate", self.learning_rate)?;
        positive_f("dist_km", self.dist_km)?;
        positive_f("clip_norm", self.clip_norm)?;
        for (key, v) in [
            ("batch_size", self.batch_size),
            ("hidden_dim", self.hidden_dim),
            ("gcn_layers", self.gcn_layers),
            ("max_epochs", self.max_epochs),
            ("embed_components", self.embed_components),
            ("window_hours", self.window_hours as usize),
        ] {
            if v == 0 {
                return Err(Error::config(key, "must be at least 1"));
            }
        }
        if self.embed_components > crate::embedpath::EMBEDDING_DIM {
            return Err(Error::config("embed_components", "must not exceed 768"));
        }
        let s = self.stride_hours;
        if s != 1 && s != 6 {
            return Err(Error::config("stride_hours", format!("{s}: must be 1 or 6")));
        }
        if self.window_hours % s != 0 {
            return Err(Error::config(
                "window_hours",
                format!("{} is not a multiple of the {s}h stride", self.window_hours),
            ));
        }
        if self.horizons.is_empty() {
            return Err(Error::config("horizons", "at least one horizon is needed"));
        }
        if self.horizons.windows(2).any(|w| w[0] >= w[1]) || self.horizons[0] == 0 {
            return Err(Error::config("horizons", "must be positive and ascending"));
        }
        if let Some(h) = self.horizons.iter().find(|&&h| h % s != 0) {
            return Err(Error::config(
                "horizons",
                format!("horizon {h}h is not reachable with a {s}h stride"),
            ));
        }
        if let SplitSpec::Ratio { train, val, test } = self.split {
            if [train, val, test].iter().any(|f| !(*f > 0.0 && *f < 1.0))
                || ((train + val + test) - 1.0).abs() > 1e-9
            {
                return Err(Error::config(
                    "split_ratios",
                    "three fractions in (0, 1) summing to 1",
                ));
            }
        }
        if let SplitSpec::Manual {
            val_start,
            test_start,
        } = self.split
        {
            if val_start >= test_start {
                return Err(Error::config("test_start", "must come after val_start"));
            }
        }
        if self.threads == 0 {
            return Err(Error::config("threads", "must be at least 1"));
        }
        Ok(())
    }

    pub fn window_steps(&self) -> usize {
        (self.window_hours / self.stride_hours) as usize
    }

    pub fn horizon_steps(&self) -> Vec<usize> {
        self.horizons
            .iter()
            .map(|h| (h / self.stride_hours) as usize)
            .collect()
    }

    pub fn model_config(&self, n_features: usize) -> ModelConfig {
        ModelConfig {
            n_features,
            hidden: self.hidden_dim,
            gcn_layers: self.gcn_layers,
            window: self.window_steps(),
            horizons: self.horizon_steps(),
        }
    }

    /// Same run at a different stride: the window is kept in hours and
    /// horizons the stride cannot reach are dropped.
    pub fn with_stride(&self, stride_hours: u32) -> Result<TrainConfig> {
        let mut c = self.clone();
        c.stride_hours = stride_hours;
        c.horizons.retain(|h| h % stride_hours == 0);
        c.validate()?;
        Ok(c)
    }

    /// Canonical file text; [`parse_run_config`] reads it back unchanged.
    pub fn to_cfg_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        put("learning_rate", self.learning_rate.to_string());
        put("batch_size", self.batch_size.to_string());
        put("window_hours", self.window_hours.to_string());
        put("dist_km", self.dist_km.to_string());
        put("hidden_dim", self.hidden_dim.to_string());
        put("gcn_layers", self.gcn_layers.to_string());
        put("max_epochs", self.max_epochs.to_string());
        put("patience", self.patience.to_string());
        put("seed", self.seed.to_string());
        put("stride_hours", self.stride_hours.to_string());
        put("horizons", join(&self.horizons));
        match &self.split {
            SplitSpec::Ratio { train, val, test } => {
                put("split", "ratio".into());
                put("split_ratios", join(&[train, val, test]));
            }
            SplitSpec::Manual {
                val_start,
                test_start,
            } => {
                put("split", "manual".into());
                put("val_start", format_timestamp(*val_start));
                put("test_start", format_timestamp(*test_start));
            }
        }
        put("clip_norm", self.clip_norm.to_string());
        put("embed_components", self.embed_components.to_string());
        out
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn positive_f(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(key, format!("{v}: must be a positive number")))
    }
}

pub fn load_run_config(path: &Path) -> Result<TrainConfig> {
    parse_run_config(&fsutil::read_string(path)?)
}

pub fn parse_run_config(text: &str) -> Result<TrainConfig> {
    let mut kv = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::format("run config", format!("line {}: expected `key = value`", lineno + 1))
        })?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) || k == "threads" {
            return Err(Error::config(k, "unknown key"));
        }
        if kv.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::config(k, "given twice"));
        }
    }
    let required = |k: &str| -> Result<&str> {
        kv.get(k)
            .map(String::as_str)
            .ok_or_else(|| Error::config(k, "missing required key"))
    };
    let mut cfg = TrainConfig::new(
        num(required("learning_rate")?, "learning_rate")?,
        num(required("batch_size")?, "batch_size")?,
        num(required("window_hours")?, "window_hours")?,
        num(required("dist_km")?, "dist_km")?,
        num(required("hidden_dim")?, "hidden_dim")?,
    );
    let opt = |k: &str| kv.get(k).map(String::as_str);
    if let Some(v) = opt("gcn_layers") {
        cfg.gcn_layers = num(v, "gcn_layers")?;
    }
    if let Some(v) = opt("max_epochs") {
        cfg.max_epochs = num(v, "max_epochs")?;
    }
    if let Some(v) = opt("patience") {
        cfg.patience = num(v, "patience")?;
    }
    if let Some(v) = opt("seed") {
        cfg.seed = num(v, "seed")?;
    }
    if let Some(v) = opt("stride_hours") {
        cfg.stride_hours = num(v, "stride_hours")?;
    }
    if let Some(v) = opt("clip_norm") {
        cfg.clip_norm = num(v, "clip_norm")?;
    }
    if let Some(v) = opt("embed_components") {
        cfg.embed_components = num(v, "embed_components")?;
    }
    cfg.horizons = match opt("horizons") {
        Some(v) => list(v, "horizons")?,
        None => DEFAULT_HORIZONS
            .iter()
            .copied()
            .filter(|h| h % cfg.stride_hours.max(1) == 0)
            .collect(),
    };
    let mode = opt("split").unwrap_or("ratio");
    cfg.split = match mode {
        "ratio" => {
            for k in ["val_start", "test_start"] {
                if kv.contains_key(k) {
                    return Err(Error::config(k, "only valid with `split = manual`"));
                }
            }
            match opt("split_ratios") {
                Some(v) => {
                    let r: Vec<f64> = list(v, "split_ratios")?;
                    if r.len() != 3 {
                        return Err(Error::config("split_ratios", "expected three fractions"));
                    }
                    SplitSpec::Ratio {
                        train: r[0],
                        val: r[1],
                        test: r[2],
                    }
                }
                None => SplitSpec::default(),
            }
        }
        "manual" => {
            if kv.contains_key("split_ratios") {
                return Err(Error::config("split_ratios", "only valid with `split = ratio`"));
            }
            let ts = |k: &str| -> Result<_> {
                parse_timestamp(required(k)?).map_err(|e| Error::config(k, e.to_string()))
            };
            SplitSpec::Manual {
                val_start: ts("val_start")?,
                test_start: ts("test_start")?,
            }
        }
        other => {
            return Err(Error::config("split", format!("`{other}`: expected ratio or manual")))
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

fn num<T: FromStr>(v: &str, key: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::config(key, format!("`{v}` is not a valid number")))
}

fn list<T: FromStr>(v: &str, key: &str) -> Result<Vec<T>> {
    v.split(',').map(|s| num(s.trim(), key)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "learning_rate = 0.001\nbatch_size = 16\nwindow_hours = 24\ndist_km = 4\nhidden_dim = 32\n";

    #[test]
    fn defaults_fill_in() {
        let c = parse_run_config(BASE).unwrap();
        assert_eq!(c.gcn_layers, 2);
        assert_eq!(c.max_epochs, 100);
        assert_eq!(c.patience, 10);
        assert_eq!(c.horizons, DEFAULT_HORIZONS.to_vec());
        assert_eq!(c.split, SplitSpec::default());
    }

    #[test]
    fn six_hour_stride_drops_first_horizon() {
        let c = parse_run_config(&format!("{BASE}stride_hours = 6\n")).unwrap();
        assert_eq!(c.horizons, vec![6, 12, 18, 24, 36, 48]);
        assert_eq!(c.horizon_steps(), vec![1, 2, 3, 4, 6, 8]);
        assert_eq!(c.window_steps(), 4);
        let bad = parse_run_config(&format!("{BASE}stride_hours = 6\nhorizons = 1,6\n"));
        assert!(matches!(bad, Err(Error::Config { key, .. }) if key == "horizons"));
    }

    #[test]
    fn rejects_unknown_missing_and_zero() {
        let e = parse_run_config(&format!("{BASE}dropout = 0.1\n")).unwrap_err();
        assert!(matches!(e, Error::Config { ref key, .. } if key == "dropout"));
        let e = parse_run_config("batch_size = 16\n").unwrap_err();
        assert!(matches!(e, Error::Config { ref key, .. } if key == "learning_rate"));
        let e = parse_run_config(&BASE.replace("batch_size = 16", "batch_size = 0")).unwrap_err();
        assert!(e.to_string().contains("batch_size"));
        assert!(parse_run_config(&format!("{BASE}stride_hours = 3\n")).is_err());
        assert!(parse_run_config(&format!("{BASE}split_ratios = 0.5,0.5,0.5\n")).is_err());
    }

    #[test]
    fn manual_split_and_round_trip() {
        let text = format!(
            "{BASE}split = manual\nval_start = 2023-01-01T00:00:00Z\ntest_start = 2024-01-01T00:00:00Z\nseed = 7\n"
        );
        let c = parse_run_config(&text).unwrap();
        assert!(matches!(c.split, SplitSpec::Manual { .. }));
        assert_eq!(parse_run_config(&c.to_cfg_text()).unwrap(), c);
        let d = parse_run_config(BASE).unwrap();
        assert_eq!(parse_run_config(&d.to_cfg_text()).unwrap(), d);
    }
}
