use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalreport::EvalReport;
use crate::fsutil;
use crate::griddata::GridDomain;
use crate::train::TrainConfig;

pub const REPORT_FORMAT: &str = "gridcast-report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset_sha256: String,
    pub checkpoint_sha256: Option<String>,
    pub gridcast_version: String,
}

impl Provenance {
    pub fn new(dataset_sha256: String, checkpoint_sha256: Option<String>) -> Self {
        Provenance {
            dataset_sha256,
            checkpoint_sha256,
            gridcast_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// Everything an evaluation run reports. Contains no timings, so reruns compare byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format: String,
    /// How features and target were scaled.
    pub standardization: String,
    /// How per-horizon scores were aggregated.
    pub aggregation: String,
    pub config: TrainConfig,
    pub model: EvalReport,
    pub baselines: Vec<EvalReport>,
    pub provenance: Provenance,
}

impl RunReport {
    pub fn new(
        config: TrainConfig,
        model: EvalReport,
        baselines: Vec<EvalReport>,
        provenance: Provenance,
    ) -> Self {
        RunReport {
            format: REPORT_FORMAT.into(),
            standardization: "per-variable train-split mean and population std (floor 1e-8); \
                              target uses the t2m feature statistics"
                .into(),
            aggregation: "MAE/RMSE over test samples x nodes per horizon; mean MAE is the \
                          unweighted mean over horizons"
                .into(),
            config,
            model,
            baselines,
            provenance,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::format("report", e.to_string()))
    }
}

/// `node,lat,lon,mae_c` rows in node order.
pub fn node_map_csv(domain: &GridDomain, mae: &[f64]) -> Result<String> {
    check_len(domain, mae)?;
    let mut out = String::from("node,lat,lon,mae_c\n");
    for (n, m) in mae.iter().enumerate() {
        let p = domain.coords(n).expect("checked length");
        out.push_str(&format!("{n},{:.6},{:.6},{m:.6}\n", p.lat, p.lon));
    }
    Ok(out)
}

/// Binary graymap (`P5`), north up, scaled so the smallest error is black and
/// the largest white. Returns the image and the `(min, max)` scale.
pub fn node_map_pgm(domain: &GridDomain, mae: &[f64]) -> Result<(Vec<u8>, (f64, f64))> {
    check_len(domain, mae)?;
    let lo = mae.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = mae.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (w, h) = (domain.n_lon(), domain.n_lat());
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    for y in 0..h {
        let row = h - 1 - y;
        for col in 0..w {
            let v = mae[domain.node_index(row, col).expect("in range")];
            let g = if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
            out.push((g * 255.0).round() as u8);
        }
    }
    Ok((out, (lo, hi)))
}

fn check_len(domain: &GridDomain, mae: &[f64]) -> Result<()> {
    if mae.len() != domain.node_count() {
        return Err(Error::shape(
            "node map",
            format!("{} values for {} nodes", mae.len(), domain.node_count()),
        ));
    }
    Ok(())
}

/// Writes `<stem>.csv`, `<stem>.pgm` and `<stem>.scale.txt` into `dir`.
pub fn write_node_map(dir: &Path, stem: &str, domain: &GridDomain, mae: &[f64]) -> Result<Vec<PathBuf>> {
    let csv = node_map_csv(domain, mae)?;
    let (pgm, (lo, hi)) = node_map_pgm(domain, mae)?;
    let paths = [
        dir.join(format!("{stem}.csv")),
        dir.join(format!("{stem}.pgm")),
        dir.join(format!("{stem}.scale.txt")),
    ];
    fsutil::write_atomic(&paths[0], csv.as_bytes())?;
    fsutil::write_atomic(&paths[1], &pgm)?;
    let scale = format!("min_mae_c = {lo:.6}\nmax_mae_c = {hi:.6}\n");
    fsutil::write_atomic(&paths[2], scale.as_bytes())?;
    Ok(paths.to_vec())
}
