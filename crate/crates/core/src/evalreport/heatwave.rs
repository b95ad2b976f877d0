use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::griddata::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HeatwaveMode {
    /// Daily maximum above a fixed temperature in °C.
    Absolute { threshold_c: f64 },
    /// Daily maximum above this percentile of the node's own reference period.
    Percentile { percentile: f64 },
}

/// Runs of at least `min_days` days whose daily maximum strictly exceeds the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatwaveDefinition {
    pub mode: HeatwaveMode,
    pub min_days: usize,
}

impl HeatwaveDefinition {
    pub fn validate(&self) -> Result<()> {
        if self.min_days == 0 {
            return Err(Error::Heatwave("minimum run length must be at least one day".into()));
        }
        match self.mode {
            HeatwaveMode::Absolute { threshold_c } if !threshold_c.is_finite() => {
                Err(Error::Heatwave("threshold must be finite".into()))
            }
            HeatwaveMode::Percentile { percentile } if !(percentile > 0.0 && percentile < 100.0) => {
                Err(Error::Heatwave(format!("percentile {percentile} outside (0, 100)")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatwaveEvent {
    pub node: usize,
    pub start_day: usize,
    pub length_days: usize,
    pub peak_c: f64,
}

/// Linear interpolation between closest ranks, `rank = p/100 * (n - 1)`.
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = p / 100.0 * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (rank - lo as f64))
}

/// Finds heatwave events in per-node daily maxima (°C).
///
/// Percentile mode derives each node's threshold from `reference[node]`.
pub fn detect_heatwaves(
    series: &[Vec<f64>],
    def: &HeatwaveDefinition,
    reference: Option<&[Vec<f64>]>,
) -> Result<Vec<HeatwaveEvent>> {
    def.validate()?;
    let thresholds: Vec<f64> = match def.mode {
        HeatwaveMode::Absolute { threshold_c } => vec![threshold_c; series.len()],
        HeatwaveMode::Percentile { percentile: p } => {
            let reference = reference
                .ok_or_else(|| Error::Heatwave("percentile mode needs a reference period".into()))?;
            if reference.len() != series.len() {
                return Err(Error::Heatwave(format!(
                    "reference covers {} nodes, series {}",
                    reference.len(),
                    series.len()
                )));
            }
            reference
                .iter()
                .map(|r| {
                    percentile(r, p)
                        .ok_or_else(|| Error::Heatwave("reference period is empty".into()))
                })
                .collect::<Result<_>>()?
        }
    };
    let mut events = Vec::new();
    for (node, (days, &thr)) in series.iter().zip(&thresholds).enumerate() {
        if days.len() < def.min_days {
            return Err(Error::Heatwave(format!(
                "node {node} has {} days, fewer than the minimum run of {}",
                days.len(),
                def.min_days
            )));
        }
        let mut start = None;
        for d in 0..=days.len() {
            let hot = d < days.len() && days[d] > thr;
            match (hot, start) {
                (true, None) => start = Some(d),
                (false, Some(s)) => {
                    if d - s >= def.min_days {
                        events.push(HeatwaveEvent {
                            node,
                            start_day: s,
                            length_days: d - s,
                            peak_c: days[s..d].iter().copied().fold(f64::MIN, f64::max),
                        });
                    }
                    start = None;
                }
                _ => {}
            }
        }
    }
    Ok(events)
}

/// Calendar days and per-node daily maximum t2m in °C. Missing hours are skipped.
pub fn daily_max_c(d: &Dataset) -> Result<(Vec<NaiveDate>, Vec<Vec<f64>>)> {
    let k = d.target_index();
    let mut by_day: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
    for t in 0..d.n_times() {
        let row = by_day
            .entry(d.timestamp(t).date())
            .or_insert_with(|| vec![f64::NEG_INFINITY; d.n_nodes()]);
        for (n, m) in row.iter_mut().enumerate() {
            if !d.is_missing(t, n, k) {
                *m = m.max(d.value(t, n, k) - 273.15);
            }
        }
    }
    let days: Vec<NaiveDate> = by_day.keys().copied().collect();
    let mut series = vec![Vec::with_capacity(days.len()); d.n_nodes()];
    for (day, row) in &by_day {
        for (n, &m) in row.iter().enumerate() {
            if m == f64::NEG_INFINITY {
                return Err(Error::Heatwave(format!("node {n} has no observations on {day}")));
            }
            series[n].push(m);
        }
    }
    Ok((days, series))
}

/// CSV with header `node,start_date,length_days,peak_c`.
pub fn events_csv(events: &[HeatwaveEvent], days: &[NaiveDate]) -> String {
    let mut out = String::from("node,start_date,length_days,peak_c\n");
    for e in events {
        out.push_str(&format!(
            "{},{},{},{:.2}\n",
            e.node,
            days[e.start_day].format("%Y-%m-%d"),
            e.length_days,
            e.peak_c
        ));
    }
    out
}
