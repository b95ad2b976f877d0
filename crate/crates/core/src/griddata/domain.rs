use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in plain latitude/longitude degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Self {
        LatLon { lat, lon }
    }
}

/// A regular lat/lon grid over a bounding box.
///
/// Nodes are numbered row-major: latitude ascending, then longitude ascending,
/// so node `i` sits at row `i / n_lon`, column `i % n_lon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridDomain {
    lat_min: f64,
    lat_max: f64,
    lon_min: f64,
    lon_max: f64,
    n_lat: usize,
    n_lon: usize,
}

impl GridDomain {
    pub fn new(
        lat_min: f64,
        lat_max: f64,
        lon_min: f64,
        lon_max: f64,
        n_lat: usize,
        n_lon: usize,
    ) -> Result<Self> {
        let finite = [lat_min, lat_max, lon_min, lon_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Domain("non-finite bounds".into()));
        }
        if !(lat_min < lat_max) || !(lon_min < lon_max) {
            return Err(Error::Domain(format!(
                "bounds must satisfy min < max (lat {lat_min}..{lat_max}, lon {lon_min}..{lon_max})"
            )));
        }
        if lat_min < -90.0 || lat_max > 90.0 || lon_min < -180.0 || lon_max > 180.0 {
            return Err(Error::Domain("bounds outside [-90, 90] x [-180, 180]".into()));
        }
        if n_lat < 2 || n_lon < 2 {
            return Err(Error::Domain(format!(
                "need at least 2x2 points, got {n_lat}x{n_lon}"
            )));
        }
        Ok(GridDomain {
            lat_min,
            lat_max,
            lon_min,
            lon_max,
            n_lat,
            n_lon,
        })
    }

    /// A grid with approximately `spacing_km` between neighbouring points, anchored at its south-west corner.
    pub fn with_spacing_km(
        lat_min: f64,
        lon_min: f64,
        n_lat: usize,
        n_lon: usize,
        spacing_km: f64,
    ) -> Result<Self> {
        let km_per_deg = crate::geograph::EARTH_RADIUS_KM.to_radians();
        let dlat = spacing_km / km_per_deg;
        let dlon = spacing_km / (km_per_deg * lat_min.to_radians().cos());
        GridDomain::new(
            lat_min,
            lat_min + dlat * (n_lat.max(2) - 1) as f64,
            lon_min,
            lon_min + dlon * (n_lon.max(2) - 1) as f64,
            n_lat,
            n_lon,
        )
    }

    /// Region A in southwestern Ontario: 42.78N 81.45W to 43.18N 81.05W.
    pub fn region_a(n_lat: usize, n_lon: usize) -> Result<Self> {
        GridDomain::new(42.78, 43.18, -81.45, -81.05, n_lat, n_lon)
    }

    pub fn lat_min(&self) -> f64 {
        self.lat_min
    }
    pub fn lat_max(&self) -> f64 {
        self.lat_max
    }
    pub fn lon_min(&self) -> f64 {
        self.lon_min
    }
    pub fn lon_max(&self) -> f64 {
        self.lon_max
    }
    pub fn n_lat(&self) -> usize {
        self.n_lat
    }
    pub fn n_lon(&self) -> usize {
        self.n_lon
    }

    pub fn node_count(&self) -> usize {
        self.n_lat * self.n_lon
    }

    pub fn lat_at(&self, row: usize) -> f64 {
        self.lat_min + (self.lat_max - self.lat_min) * row as f64 / (self.n_lat - 1) as f64
    }

    pub fn lon_at(&self, col: usize) -> f64 {
        self.lon_min + (self.lon_max - self.lon_min) * col as f64 / (self.n_lon - 1) as f64
    }

    pub fn node_index(&self, row: usize, col: usize) -> Option<usize> {
        (row < self.n_lat && col < self.n_lon).then(|| row * self.n_lon + col)
    }

    pub fn row_col(&self, node: usize) -> Option<(usize, usize)> {
        (node < self.node_count()).then(|| (node / self.n_lon, node % self.n_lon))
    }

    pub fn coords(&self, node: usize) -> Option<LatLon> {
        self.row_col(node)
            .map(|(r, c)| LatLon::new(self.lat_at(r), self.lon_at(c)))
    }

    pub fn all_coords(&self) -> Vec<LatLon> {
        (0..self.node_count())
            .map(|i| self.coords(i).unwrap())
            .collect()
    }
}

/// One of the six surface analysis fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variable {
    T2m,
    D2m,
    U10,
    V10,
    Sp,
    Orog,
}

impl Variable {
    pub const ALL: [Variable; 6] = [
        Variable::T2m,
        Variable::D2m,
        Variable::U10,
        Variable::V10,
        Variable::Sp,
        Variable::Orog,
    ];

    pub fn abbreviation(self) -> &'static str {
        match self {
            Variable::T2m => "t2m",
            Variable::D2m => "d2m",
            Variable::U10 => "u10",
            Variable::V10 => "v10",
            Variable::Sp => "sp",
            Variable::Orog => "orog",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Variable::T2m | Variable::D2m => "K",
            Variable::U10 | Variable::V10 => "m/s",
            Variable::Sp => "Pa",
            Variable::Orog => "m",
        }
    }

    pub fn is_static(self) -> bool {
        self == Variable::Orog
    }

    pub fn description(self) -> &'static str {
        match self {
            Variable::T2m => "2-meter air temperature",
            Variable::D2m => "2-meter dewpoint temperature",
            Variable::U10 => "10-meter u-component of wind",
            Variable::V10 => "10-meter v-component of wind",
            Variable::Sp => "surface pressure",
            Variable::Orog => "orography",
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbreviation())
    }
}

impl FromStr for Variable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variable::ALL
            .into_iter()
            .find(|v| v.abbreviation() == s)
            .ok_or_else(|| Error::UnknownVariable(s.to_string()))
    }
}

/// Checks that `vars` are unique and include the target `t2m`.
pub fn validate_variables(vars: &[Variable]) -> Result<()> {
    for (i, v) in vars.iter().enumerate() {
        if vars[..i].contains(v) {
            return Err(Error::format("variable table", format!("duplicate `{v}`")));
        }
    }
    if !vars.contains(&Variable::T2m) {
        return Err(Error::format("variable table", "t2m (the target) is missing"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let d = GridDomain::region_a(5, 7).unwrap();
        assert_eq!(d.node_count(), 35);
        for i in 0..d.node_count() {
            let (r, c) = d.row_col(i).unwrap();
            assert_eq!(d.node_index(r, c), Some(i));
        }
        assert_eq!(d.coords(0).unwrap(), LatLon::new(42.78, -81.45));
        let last = d.coords(34).unwrap();
        assert!((last.lat - 43.18).abs() < 1e-12 && (last.lon + 81.05).abs() < 1e-12);
        // latitude ascending first: node 1 is one step east
        assert_eq!(d.coords(1).unwrap().lat, 42.78);
        assert!(d.coords(35).is_none());
    }

    #[test]
    fn invalid_domains() {
        assert!(GridDomain::new(1.0, 1.0, 0.0, 1.0, 2, 2).is_err());
        assert!(GridDomain::new(0.0, 1.0, 2.0, 1.0, 2, 2).is_err());
        assert!(GridDomain::new(0.0, 1.0, 0.0, 1.0, 1, 2).is_err());
    }

    #[test]
    fn variable_table_rules() {
        assert_eq!("sp".parse::<Variable>().unwrap(), Variable::Sp);
        assert!(matches!(
            "rh2m".parse::<Variable>(),
            Err(Error::UnknownVariable(_))
        ));
        assert!(validate_variables(&[Variable::D2m]).is_err());
        assert!(validate_variables(&[Variable::T2m, Variable::T2m]).is_err());
        assert!(validate_variables(&Variable::ALL).is_ok());
        assert!(Variable::Orog.is_static() && !Variable::T2m.is_static());
    }
}
