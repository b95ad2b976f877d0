//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use gridcast::griddata::{generate_synthetic, Dataset, GridDomain, LatLon, SynthConfig};
use gridcast::train::{load_run_config, TrainConfig};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

pub fn load_config(name: &str) -> TrainConfig {
    load_run_config(&config_path(name)).expect("shipped config parses")
}

/// The 12 x 12, 2000-step hourly synthetic record used for the skill checks.
pub fn skill_dataset() -> Dataset {
    let domain = GridDomain::region_a(12, 12).unwrap();
    generate_synthetic(&domain, 2000, 1, 42, &SynthConfig::default()).unwrap()
}

/// Great-circle distance via the atan2 form, kept separate from the library's.
pub fn oracle_km(a: LatLon, b: LatLon) -> f64 {
    let r = 6371.0_f64;
    let (la1, la2) = (a.lat.to_radians(), b.lat.to_radians());
    let dla = la2 - la1;
    let dlo = (b.lon - a.lon).to_radians();
    let h = (dla * 0.5).sin().powi(2) + la1.cos() * la2.cos() * (dlo * 0.5).sin().powi(2);
    2.0 * r * h.sqrt().atan2((1.0 - h).sqrt())
}

/// All pairs `i < j` within `dist_km`, by exhaustive comparison.
pub fn brute_force_edges(coords: &[LatLon], dist_km: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..coords.len() {
        for j in i + 1..coords.len() {
            if oracle_km(coords[i], coords[j]) <= dist_km {
                out.push((i, j));
            }
        }
    }
    out
}

/// Per-horizon MAE and RMSE of `[s][k][n]` arrays after mapping both through `x * std + mean`.
pub fn naive_metrics(
    pred: &[f64],
    target: &[f64],
    shape: (usize, usize, usize),
    mean: f64,
    std: f64,
) -> (Vec<f64>, Vec<f64>) {
    let (s_n, k_n, n_n) = shape;
    let mut mae = Vec::new();
    let mut rmse = Vec::new();
    for k in 0..k_n {
        let mut errs = Vec::new();
        for s in 0..s_n {
            for n in 0..n_n {
                let i = (s * k_n + k) * n_n + n;
                let p = pred[i] * std + mean - 273.15;
                let t = target[i] * std + mean - 273.15;
                errs.push(p - t);
            }
        }
        let m = errs.len() as f64;
        mae.push(errs.iter().map(|e| e.abs()).sum::<f64>() / m);
        rmse.push((errs.iter().map(|e| e * e).sum::<f64>() / m).sqrt());
    }
    (mae, rmse)
}

/// `(node, start, length, peak)` for every maximal run of length >= `min_days`
/// with all values strictly above the node's threshold, by checking every interval.
pub fn heatwave_oracle(
    series: &[Vec<f64>],
    thresholds: &[f64],
    min_days: usize,
) -> Vec<(usize, usize, usize, f64)> {
    let mut out = Vec::new();
    for (node, days) in series.iter().enumerate() {
        let thr = thresholds[node];
        let n = days.len();
        for s in 0..n {
            for e in s + 1..=n {
                let all_hot = days[s..e].iter().all(|&v| v > thr);
                let left_closed = s == 0 || days[s - 1] <= thr;
                let right_closed = e == n || days[e] <= thr;
                if all_hot && left_closed && right_closed && e - s >= min_days {
                    let peak = days[s..e].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    out.push((node, s, e - s, peak));
                }
            }
        }
    }
    out
}

/// Percentile with linear interpolation between order statistics at `p/100 * (n-1)`.
pub fn oracle_percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = p / 100.0 * (v.len() as f64 - 1.0);
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < v.len() {
        v[i] + frac * (v[i + 1] - v[i])
    } else {
        v[i]
    }
}
