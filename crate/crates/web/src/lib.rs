//! Browser bindings for a few gridcast operations.
//!
//! Each export has a plain Rust counterpart so the logic is tested natively;
//! the `#[wasm_bindgen]` wrappers only convert errors.

use gridcast::evalreport::{detect_heatwaves, HeatwaveDefinition, HeatwaveMode};
use gridcast::geograph::build_graph;
use gridcast::griddata::{generate_synthetic, GridDomain, SynthConfig, Variable};
use wasm_bindgen::prelude::*;

/// Largest grid side the page may request; keeps a synthetic run well under a second.
pub const MAX_SIDE: usize = 64;

fn domain(rows: usize, cols: usize) -> Result<GridDomain, String> {
    if rows > MAX_SIDE || cols > MAX_SIDE {
        return Err(format!("grid sides are limited to {MAX_SIDE}"));
    }
    GridDomain::region_a(rows, cols).map_err(|e| e.to_string())
}

/// Node degrees followed by the flattened `(i, j)` edge pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphView {
    pub degrees: Vec<u32>,
    pub edges: Vec<u32>,
}

pub fn graph_view(rows: usize, cols: usize, dist_km: f64) -> Result<GraphView, String> {
    let g = build_graph(&domain(rows, cols)?, dist_km).map_err(|e| e.to_string())?;
    Ok(GraphView {
        degrees: (0..g.node_count()).map(|i| g.degree(i) as u32).collect(),
        edges: g.edges().iter().flat_map(|e| [e.i as u32, e.j as u32]).collect(),
    })
}

/// t2m in °C at hourly step `hour` of a seeded synthetic record, row-major from the south-west corner.
pub fn synthetic_field(
    rows: usize,
    cols: usize,
    hour: usize,
    seed: u64,
    noise_k: f64,
) -> Result<Vec<f64>, String> {
    if !(0.0..=10.0).contains(&noise_k) {
        return Err("noise must be between 0 and 10 K".into());
    }
    let cfg = SynthConfig {
        noise_std_k: noise_k,
        ..SynthConfig::default()
    };
    let d = generate_synthetic(&domain(rows, cols)?, hour + 1, 1, seed, &cfg)
        .map_err(|e| e.to_string())?;
    let k = d.var_index(Variable::T2m).expect("synthetic data has t2m");
    Ok((0..d.n_nodes()).map(|n| d.value(hour, n, k) - 273.15).collect())
}

/// Heatwaves in one daily-maximum series, as flattened `(start_day, length_days)` pairs.
///
/// A negative `percentile` selects the absolute `threshold_c`; otherwise the
/// threshold is that percentile of the series itself.
pub fn heatwave_runs(
    daily_max_c: &[f64],
    threshold_c: f64,
    percentile: f64,
    min_days: usize,
) -> Result<Vec<u32>, String> {
    let mode = if percentile < 0.0 {
        HeatwaveMode::Absolute { threshold_c }
    } else {
        HeatwaveMode::Percentile { percentile }
    };
    let series = vec![daily_max_c.to_vec()];
    let def = HeatwaveDefinition { mode, min_days };
    let events = detect_heatwaves(&series, &def, Some(&series)).map_err(|e| e.to_string())?;
    Ok(events
        .iter()
        .flat_map(|e| [e.start_day as u32, e.length_days as u32])
        .collect())
}

#[wasm_bindgen]
pub fn node_degrees(rows: usize, cols: usize, dist_km: f64) -> Result<Vec<u32>, JsError> {
    graph_view(rows, cols, dist_km)
        .map(|g| g.degrees)
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn edge_pairs(rows: usize, cols: usize, dist_km: f64) -> Result<Vec<u32>, JsError> {
    graph_view(rows, cols, dist_km)
        .map(|g| g.edges)
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn t2m_field(
    rows: usize,
    cols: usize,
    hour: usize,
    seed: u64,
    noise_k: f64,
) -> Result<Vec<f64>, JsError> {
    synthetic_field(rows, cols, hour, seed, noise_k).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn heatwaves(
    daily_max_c: &[f64],
    threshold_c: f64,
    percentile: f64,
    min_days: usize,
) -> Result<Vec<u32>, JsError> {
    heatwave_runs(daily_max_c, threshold_c, percentile, min_days).map_err(|e| JsError::new(&e))
}
