use std::f64::consts::PI;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geograph::haversine;
use crate::griddata::{Dataset, GridDomain, LatLon, Variable};

const HOURS_PER_YEAR: f64 = 8760.0;

/// Knobs of the synthetic surface generator. All amplitudes in Kelvin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub start: NaiveDateTime,
    pub base_k: f64,
    /// Annual cycle amplitude; coldest at the start of the calendar year.
    pub seasonal_amp_k: f64,
    /// Daily cycle amplitude; warmest at 15:00 UTC.
    pub diurnal_amp_k: f64,
    /// Temperature change per degree of latitude northward.
    pub lat_gradient_k_per_deg: f64,
    /// Gaussian warm bump centred on the domain (an urban-island analogue).
    pub bump_amp_k: f64,
    /// Bump width as a fraction of the domain diagonal.
    pub bump_width_frac: f64,
    /// Standard deviation of the white noise added to t2m; other fields scale from it.
    pub noise_std_k: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            start: NaiveDate::from_ymd_opt(2022, 5, 1)
                .unwrap()
                .and_hms_opt(0, 0, 0)
                .unwrap(),
            base_k: 283.0,
            seasonal_amp_k: 12.0,
            diurnal_amp_k: 5.0,
            lat_gradient_k_per_deg: -0.8,
            bump_amp_k: 2.0,
            bump_width_frac: 0.25,
            noise_std_k: 0.6,
        }
    }
}

impl SynthConfig {
    pub fn noiseless() -> Self {
        SynthConfig {
            noise_std_k: 0.0,
            ..Default::default()
        }
    }
}

/// Deterministic components of t2m at one node and time, excluding noise.
struct Field<'a> {
    cfg: &'a SynthConfig,
    domain: &'a GridDomain,
    center: LatLon,
    width_km: f64,
}

impl<'a> Field<'a> {
    fn new(cfg: &'a SynthConfig, domain: &'a GridDomain) -> Self {
        let center = LatLon::new(
            0.5 * (domain.lat_min() + domain.lat_max()),
            0.5 * (domain.lon_min() + domain.lon_max()),
        );
        let diag = haversine(
            LatLon::new(domain.lat_min(), domain.lon_min()),
            LatLon::new(domain.lat_max(), domain.lon_max()),
        );
        Field {
            cfg,
            domain,
            center,
            width_km: (cfg.bump_width_frac * diag).max(1e-6),
        }
    }

    fn seasonal(&self, ts: NaiveDateTime) -> f64 {
        let jan1 = NaiveDate::from_ymd_opt(ts.year(), 1, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        let h = (ts - jan1).num_minutes() as f64 / 60.0;
        -self.cfg.seasonal_amp_k * (2.0 * PI * h / HOURS_PER_YEAR).cos()
    }

    fn diurnal_phase(ts: NaiveDateTime) -> f64 {
        let hod = ts.hour() as f64 + ts.minute() as f64 / 60.0;
        2.0 * PI * (hod - 9.0) / 24.0
    }

    fn spatial(&self, p: LatLon) -> f64 {
        let dist = haversine(p, self.center);
        self.cfg.lat_gradient_k_per_deg * (p.lat - self.domain.lat_min())
            + self.cfg.bump_amp_k * (-0.5 * (dist / self.width_km).powi(2)).exp()
    }

    fn orography(&self, node: usize) -> f64 {
        let (r, c) = self.domain.row_col(node).unwrap();
        let y = r as f64 / (self.domain.n_lat() - 1) as f64;
        let x = c as f64 / (self.domain.n_lon() - 1) as f64;
        170.0 + 30.0 * x + 12.0 * (3.0 * y).cos()
    }
}

/// Generates the six-variable synthetic record. Identical arguments give bit-identical output.
pub fn generate_synthetic(
    domain: &GridDomain,
    n_times: usize,
    stride_hours: u32,
    seed: u64,
    cfg: &SynthConfig,
) -> Result<Dataset> {
    if n_times == 0 {
        return Err(Error::format("synthetic", "need at least one timestep"));
    }
    if stride_hours == 0 {
        return Err(Error::Stride("stride must be at least one hour".into()));
    }
    let field = Field::new(cfg, domain);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = domain.node_count();
    let coords = domain.all_coords();
    let spatial: Vec<f64> = coords.iter().map(|&p| field.spatial(p)).collect();
    let orog: Vec<f64> = (0..n).map(|i| field.orography(i)).collect();
    let sigma = cfg.noise_std_k;

    let mut values = Vec::with_capacity(n_times * n * 6);
    for t in 0..n_times {
        let ts = cfg.start + chrono::Duration::hours(t as i64 * stride_hours as i64);
        let seasonal = field.seasonal(ts);
        let phase = Field::diurnal_phase(ts);
        let diurnal = cfg.diurnal_amp_k * phase.sin();
        let synoptic_p = 250.0 * (2.0 * PI * (ts - cfg.start).num_hours() as f64 / 120.0).sin();
        for node in 0..n {
            let mut noise = || -> f64 {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * sigma
            };
            let t2m = cfg.base_k + seasonal + diurnal + spatial[node] + noise();
            let d2m = t2m - 4.0 - 0.4 * diurnal + 0.5 * noise();
            let u10 = 3.0 * phase.cos() + noise();
            let v10 = 3.0 * phase.sin() + noise();
            let sp = 101_325.0 - 12.0 * orog[node] + synoptic_p - 4.0 * seasonal + 20.0 * noise();
            values.extend_from_slice(&[t2m, d2m, u10, v10, sp, orog[node]]);
        }
    }
    Dataset::new(
        *domain,
        Variable::ALL.to_vec(),
        cfg.start,
        stride_hours,
        n_times,
        values,
    )
}
