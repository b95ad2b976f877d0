//! Text-embedding input pathway.
//!
//! Each `(timestep, node)` record is written out as a sentence, encoded to
//! a 768-d vector, and reduced with PCA fitted on training rows only. The
//! reduced vectors replace the raw features; the target stays the raw t2m.

mod encoder;
mod pca;

use chrono::Timelike;
use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::griddata::{Dataset, SplitRanges, Standardizer, Variable};
use crate::train::{ModelInputs, TargetScale};

pub use encoder::{
    encode_embedding_file, Encoder, FileEncoder, RecordId, StubEncoder, EMBEDDING_MAGIC,
};
pub use pca::{
    pca_fit, pca_reconstruct, pca_transform, PcaAccumulator, PcaModel, RANK_TOLERANCE,
};

pub const EMBEDDING_DIM: usize = 768;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != EMBEDDING_DIM {
            return Err(Error::Encoder(format!(
                "embedding has {} values, expected {EMBEDDING_DIM}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding".into()));
        }
        Ok(EmbeddingVector(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// One observation in the fixed six-variable order t2m, d2m, u10, v10, sp, orog.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub t2m: f64,
    pub d2m: f64,
    pub u10: f64,
    pub v10: f64,
    pub sp: f64,
    pub orog: f64,
}

impl Observation {
    pub fn from_dataset(d: &Dataset, t: usize, node: usize) -> Result<Self> {
        let get = |v: Variable| -> Result<f64> {
            let k = d.var_index(v).ok_or_else(|| {
                Error::Encoder(format!("dataset lacks {} needed for text records", v.abbreviation()))
            })?;
            if d.is_missing(t, node, k) {
                return Err(Error::Encoder(format!(
                    "{} missing at timestep {t}, node {node}",
                    v.abbreviation()
                )));
            }
            Ok(d.value(t, node, k))
        };
        Ok(Observation {
            t2m: get(Variable::T2m)?,
            d2m: get(Variable::D2m)?,
            u10: get(Variable::U10)?,
            v10: get(Variable::V10)?,
            sp: get(Variable::Sp)?,
            orog: get(Variable::Orog)?,
        })
    }
}

pub fn textualize(o: &Observation) -> String {
    format!(
        "temperature is {:.1} K, dew point is {:.1} K, u wind component is {:.1} m/s, \
         v wind component is {:.1} m/s, surface pressure is {:.0} Pa, elevation is {:.1} meters.",
        o.t2m, o.d2m, o.u10, o.v10, o.sp, o.orog
    )
}

pub fn encode_record(
    d: &Dataset,
    t: usize,
    node: usize,
    encoder: &dyn Encoder,
) -> Result<EmbeddingVector> {
    let text = textualize(&Observation::from_dataset(d, t, node)?);
    encoder.encode(
        RecordId {
            time: t as u64,
            node: node as u64,
        },
        &text,
    )
}

/// What the PCA fit saw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingAudit {
    pub encoder: String,
    pub components: usize,
    pub fit_rows: usize,
    pub fit_timesteps: std::ops::Range<usize>,
    pub explained_variance_ratio: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EmbeddingDataset {
    /// Reduced features (standardized on train) and the raw standardized t2m target.
    pub inputs: ModelInputs,
    pub pca: PcaModel,
    pub audit: EmbeddingAudit,
}

/// Encodes every record of a filled dataset and reduces it to `k` features.
///
/// PCA and the feature scaling see only `splits.train`; `target` scales t2m.
pub fn build_embedding_dataset(
    d: &Dataset,
    encoder: &dyn Encoder,
    k: usize,
    splits: &SplitRanges,
    target: TargetScale,
) -> Result<EmbeddingDataset> {
    let n = d.n_nodes();
    let mut acc = PcaAccumulator::new(EMBEDDING_DIM);
    for t in splits.train.clone() {
        for node in 0..n {
            acc.add(encode_record(d, t, node, encoder)?.as_slice())?;
        }
    }
    let pca = acc.finish(k)?;
    info!(
        "pca fitted on {} rows from timesteps {:?}",
        pca.n_rows, splits.train
    );
    let mut reduced = Vec::with_capacity(d.n_times() * n * k);
    for t in 0..d.n_times() {
        for node in 0..n {
            reduced.extend(pca.project_row(encode_record(d, t, node, encoder)?.as_slice())?);
        }
    }
    let scaler = Standardizer::fit_rows(
        reduced[splits.train.start * n * k..splits.train.end * n * k].chunks_exact(k),
        k,
    );
    scaler.apply_in_place(&mut reduced);
    let ti = d.target_index();
    let z: Vec<f64> = (0..d.n_times())
        .flat_map(|t| (0..n).map(move |node| (t, node)))
        .map(|(t, node)| (d.value(t, node, ti) - target.mean) / target.std)
        .collect();
    let hours = (0..d.n_times()).map(|t| d.timestamp(t).hour()).collect();
    let inputs = ModelInputs::new(n, k, reduced, z, target, hours)?;
    Ok(EmbeddingDataset {
        inputs,
        audit: EmbeddingAudit {
            encoder: encoder.describe(),
            components: k,
            fit_rows: pca.n_rows,
            fit_timesteps: splits.train.clone(),
            explained_variance_ratio: pca.explained_variance_ratio(),
        },
        pca,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_matches_example() {
        let o = Observation {
            t2m: 291.6,
            d2m: 283.7,
            u10: 4.0,
            v10: -2.1,
            sp: 99209.0,
            orog: 172.0,
        };
        assert_eq!(
            textualize(&o),
            "temperature is 291.6 K, dew point is 283.7 K, u wind component is 4.0 m/s, \
             v wind component is -2.1 m/s, surface pressure is 99209 Pa, elevation is 172.0 meters."
        );
    }

    #[test]
    fn rejects_wrong_width() {
        assert!(EmbeddingVector::new(vec![0.0; 767]).is_err());
        assert!(EmbeddingVector::new(vec![f64::NAN; 768]).is_err());
    }
}
