//! `GCKPT1` checkpoints: magic, config block, then every parameter tensor
//! in declaration order as little-endian f64.
//!
//! Config block (little-endian u32): `F`, `HD`, `L`, `W`, `K`, then the `K`
//! horizon offsets; followed by the total parameter count as u64.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil::{self, Reader};
use crate::model::{ModelConfig, ModelParams};
use crate::numcore::Parameters;

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"GCKPT1";

pub fn encode_checkpoint(cfg: &ModelConfig, params: &ModelParams) -> Result<Vec<u8>> {
    if !params.matches(cfg) {
        return Err(Error::Checkpoint("parameters do not match the config".into()));
    }
    let mut out = Vec::with_capacity(64 + params.param_count() * 8);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    for v in [
        cfg.n_features,
        cfg.hidden,
        cfg.gcn_layers,
        cfg.window,
        cfg.horizons.len(),
    ] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for &h in &cfg.horizons {
        out.extend_from_slice(&(h as u32).to_le_bytes());
    }
    out.extend_from_slice(&(params.param_count() as u64).to_le_bytes());
    for t in params.tensors() {
        for v in t.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Decodes a checkpoint. With `expected`, a config that differs is rejected.
pub fn decode_checkpoint(
    bytes: &[u8],
    expected: Option<&ModelConfig>,
) -> Result<(ModelConfig, ModelParams)> {
    let mut r = Reader::new(bytes, "checkpoint");
    r.expect_magic(CHECKPOINT_MAGIC)?;
    let f = r.u32()? as usize;
    let hd = r.u32()? as usize;
    let l = r.u32()? as usize;
    let w = r.u32()? as usize;
    let k = r.u32()? as usize;
    let horizons = (0..k)
        .map(|_| r.u32().map(|h| h as usize))
        .collect::<Result<Vec<_>>>()?;
    let cfg = ModelConfig {
        n_features: f,
        hidden: hd,
        gcn_layers: l,
        window: w,
        horizons,
    };
    cfg.validate()
        .map_err(|e| Error::Checkpoint(format!("stored config invalid: {e}")))?;
    if let Some(want) = expected {
        if want != &cfg {
            return Err(Error::Checkpoint(format!(
                "config mismatch: file has {cfg:?}, expected {want:?}"
            )));
        }
    }
    let mut params = ModelParams::zeros(&cfg);
    let count = r.u64()? as usize;
    if count != params.param_count() {
        return Err(Error::Checkpoint(format!(
            "{count} parameters stored, config implies {}",
            params.param_count()
        )));
    }
    let flat = r.f64_vec(count)?;
    r.finish()?;
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(Error::Checkpoint("non-finite parameter".into()));
    }
    params.assign_flat(&flat);
    Ok((cfg, params))
}

pub fn save_checkpoint(path: &Path, cfg: &ModelConfig, params: &ModelParams) -> Result<()> {
    fsutil::write_atomic(path, &encode_checkpoint(cfg, params)?)
}

pub fn load_checkpoint(
    path: &Path,
    expected: Option<&ModelConfig>,
) -> Result<(ModelConfig, ModelParams)> {
    decode_checkpoint(&fsutil::read_bytes(path)?, expected)
}
