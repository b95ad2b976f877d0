//! Verification scores, baselines, error maps and heatwave post-processing.

mod baselines;
mod heatwave;
mod metrics;
mod report;

pub use baselines::{
    baseline_reports, climatology_baseline, control_model_eval, evaluate_model,
    persistence_baseline, Climatology,
};
pub use heatwave::{
    daily_max_c, detect_heatwaves, events_csv, percentile, HeatwaveDefinition, HeatwaveEvent,
    HeatwaveMode,
};
pub use metrics::{compute_metrics, nodewise_mae, EvalReport, Forecasts};
pub use report::{
    node_map_csv, node_map_pgm, write_node_map, Provenance, RunReport, REPORT_FORMAT,
};
