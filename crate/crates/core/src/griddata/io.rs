//! Dataset file formats.
//!
//! CSV:
//!
//! ```text
//! #domain lat_min lat_max lon_min lon_max n_lat n_lon
//! #stride_hours k
//! #vars t2m,d2m,u10,v10,sp,orog
//! 2022-01-01T00:00:00Z,0,271.3,265.0,...
//! ```
//!
//! One row per `(timestamp, node)`; an empty field marks a missing value.
//!
//! Binary (`GCD1`, little-endian): bounds as four f64, `n_lat`, `n_lon`,
//! `stride_hours`, `F` as u32, `T`, `N` as u64, start time as i64 unix
//! seconds, then `F` length-prefixed variable names and the `T x N x F`
//! f64 array with quiet NaN for missing cells.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime};

use crate::error::{Error, Result};
use crate::fsutil::{self, Reader};
use crate::griddata::{Dataset, GridDomain, Variable};

pub const BINARY_MAGIC: &[u8; 4] = b"GCD1";
const QUIET_NAN_BITS: u64 = 0x7FF8_0000_0000_0000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Csv,
    Binary,
}

impl FromStr for DataFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(DataFormat::Csv),
            "binary" | "bin" => Ok(DataFormat::Binary),
            other => Err(Error::config("format", format!("`{other}` is not csv|binary"))),
        }
    }
}

impl DataFormat {
    /// Guesses from the extension: `.csv` is CSV, anything else binary.
    pub fn from_path(path: &Path) -> DataFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => DataFormat::Csv,
            _ => DataFormat::Binary,
        }
    }
}

pub fn load_dataset(path: &Path, format: DataFormat) -> Result<Dataset> {
    match format {
        DataFormat::Csv => parse_csv(&fsutil::read_string(path)?),
        DataFormat::Binary => decode_binary(&fsutil::read_bytes(path)?),
    }
}

pub fn save_dataset(d: &Dataset, path: &Path, format: DataFormat) -> Result<()> {
    let bytes = match format {
        DataFormat::Csv => to_csv(d).into_bytes(),
        DataFormat::Binary => encode_binary(d),
    };
    fsutil::write_atomic(path, &bytes)
}

pub fn format_timestamp(ts: NaiveDateTime) -> String {
    ts.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

pub fn parse_timestamp(s: &str) -> Result<NaiveDateTime> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.naive_utc());
    }
    let bare = s.trim_end_matches('Z');
    NaiveDateTime::parse_from_str(bare, "%Y-%m-%dT%H:%M:%S")
        .or_else(|_| NaiveDateTime::parse_from_str(bare, "%Y-%m-%dT%H:%M"))
        .or_else(|_| {
            chrono::NaiveDate::parse_from_str(bare, "%Y-%m-%d")
                .map(|d| d.and_hms_opt(0, 0, 0).unwrap())
        })
        .map_err(|_| Error::format("timestamp", format!("`{s}` is not ISO-8601")))
}

pub fn to_csv(d: &Dataset) -> String {
    let dom = d.domain();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "#domain {} {} {} {} {} {}",
        dom.lat_min(),
        dom.lat_max(),
        dom.lon_min(),
        dom.lon_max(),
        dom.n_lat(),
        dom.n_lon()
    );
    let _ = writeln!(out, "#stride_hours {}", d.stride_hours());
    let names: Vec<&str> = d.variables().iter().map(|v| v.abbreviation()).collect();
    let _ = writeln!(out, "#vars {}", names.join(","));
    for t in 0..d.n_times() {
        let ts = format_timestamp(d.timestamp(t));
        for n in 0..d.n_nodes() {
            let _ = write!(out, "{ts},{n}");
            for f in 0..d.n_vars() {
                if d.is_missing(t, n, f) {
                    out.push(',');
                } else {
                    let _ = write!(out, ",{}", d.value(t, n, f));
                }
            }
            out.push('\n');
        }
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Dataset> {
    let mut domain = None;
    let mut stride = None;
    let mut vars: Option<Vec<Variable>> = None;
    let mut rows = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut parts = rest.split_whitespace();
            match parts.next() {
                Some("domain") => {
                    let f: Vec<&str> = parts.collect();
                    if f.len() != 6 {
                        return Err(Error::format("csv header", "#domain needs 6 fields"));
                    }
                    let num = |s: &str| {
                        s.parse::<f64>()
                            .map_err(|_| Error::format("csv header", format!("bad number `{s}`")))
                    };
                    let cnt = |s: &str| {
                        s.parse::<usize>()
                            .map_err(|_| Error::format("csv header", format!("bad count `{s}`")))
                    };
                    domain = Some(GridDomain::new(
                        num(f[0])?,
                        num(f[1])?,
                        num(f[2])?,
                        num(f[3])?,
                        cnt(f[4])?,
                        cnt(f[5])?,
                    )?);
                }
                Some("stride_hours") => {
                    let s = parts.next().unwrap_or("");
                    stride = Some(s.parse::<u32>().map_err(|_| {
                        Error::format("csv header", format!("bad stride `{s}`"))
                    })?);
                }
                Some("vars") => {
                    let list = parts.collect::<Vec<_>>().join("");
                    vars = Some(
                        list.split(',')
                            .map(|v| v.trim().parse::<Variable>())
                            .collect::<Result<_>>()?,
                    );
                }
                _ => {} // free-form comment
            }
            continue;
        }
        rows.push((lineno + 1, line));
    }

    let domain = domain.ok_or_else(|| Error::format("csv header", "missing #domain"))?;
    let stride = stride.ok_or_else(|| Error::format("csv header", "missing #stride_hours"))?;
    let vars = vars.ok_or_else(|| Error::format("csv header", "missing #vars"))?;
    let n = domain.node_count();
    let f = vars.len();

    if rows.len() % n != 0 || rows.is_empty() {
        return Err(Error::format(
            "csv body",
            format!("{} rows is not a multiple of the {n} domain nodes", rows.len()),
        ));
    }
    let n_times = rows.len() / n;
    let mut values = vec![f64::NAN; n_times * n * f];
    let mut seen = vec![false; n_times * n];
    let mut times: Vec<NaiveDateTime> = Vec::with_capacity(n_times);

    for (lineno, line) in rows {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 + f {
            return Err(Error::format(
                "csv row",
                format!("line {lineno}: {} fields, expected {}", fields.len(), 2 + f),
            ));
        }
        let ts = parse_timestamp(fields[0])?;
        let t = match times.last() {
            Some(&last) if last == ts => times.len() - 1,
            Some(&last) if ts < last => {
                return Err(Error::Stride(format!(
                    "line {lineno}: timestamp {ts} goes backwards"
                )))
            }
            _ => {
                times.push(ts);
                times.len() - 1
            }
        };
        if t >= n_times {
            return Err(Error::format(
                "csv body",
                format!("line {lineno}: more timestamps than rows allow (node count mismatch)"),
            ));
        }
        let node: usize = fields[1].trim().parse().map_err(|_| {
            Error::format("csv row", format!("line {lineno}: bad node `{}`", fields[1]))
        })?;
        if node >= n {
            return Err(Error::format(
                "csv row",
                format!("line {lineno}: node {node} outside domain of {n}"),
            ));
        }
        if std::mem::replace(&mut seen[t * n + node], true) {
            return Err(Error::format(
                "csv row",
                format!("line {lineno}: duplicate node {node} at {ts}"),
            ));
        }
        for (k, raw) in fields[2..].iter().enumerate() {
            let raw = raw.trim();
            if raw.is_empty() {
                continue;
            }
            let v: f64 = raw.parse().map_err(|_| {
                Error::format("csv row", format!("line {lineno}: bad value `{raw}`"))
            })?;
            values[(t * n + node) * f + k] = v;
        }
    }
    if times.len() != n_times || seen.iter().any(|s| !s) {
        return Err(Error::format(
            "csv body",
            "node count mismatch: some timestamp lacks a row for every node",
        ));
    }
    check_stride(&times, stride)?;
    Dataset::new(domain, vars, times[0], stride, n_times, values)
}

fn check_stride(times: &[NaiveDateTime], stride: u32) -> Result<()> {
    let want = chrono::Duration::hours(stride as i64);
    for w in times.windows(2) {
        let step = w[1] - w[0];
        if step != want {
            return Err(Error::Stride(format!(
                "step of {} min between {} and {}, header says {stride} h",
                step.num_minutes(),
                w[0],
                w[1]
            )));
        }
    }
    Ok(())
}

pub fn encode_binary(d: &Dataset) -> Vec<u8> {
    let dom = d.domain();
    let mut out = Vec::with_capacity(64 + d.values().len() * 8);
    out.extend_from_slice(BINARY_MAGIC);
    for v in [dom.lat_min(), dom.lat_max(), dom.lon_min(), dom.lon_max()] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(dom.n_lat() as u32).to_le_bytes());
    out.extend_from_slice(&(dom.n_lon() as u32).to_le_bytes());
    out.extend_from_slice(&d.stride_hours().to_le_bytes());
    out.extend_from_slice(&(d.n_vars() as u32).to_le_bytes());
    out.extend_from_slice(&(d.n_times() as u64).to_le_bytes());
    out.extend_from_slice(&(d.n_nodes() as u64).to_le_bytes());
    out.extend_from_slice(&d.start().and_utc().timestamp().to_le_bytes());
    for v in d.variables() {
        let name = v.abbreviation().as_bytes();
        out.push(name.len() as u8);
        out.extend_from_slice(name);
    }
    for (v, &m) in d.values().iter().zip(d.missing_mask()) {
        let bits = if m { QUIET_NAN_BITS } else { v.to_bits() };
        out.extend_from_slice(&bits.to_le_bytes());
    }
    out
}

pub fn decode_binary(bytes: &[u8]) -> Result<Dataset> {
    let mut r = Reader::new(bytes, "binary dataset");
    r.expect_magic(BINARY_MAGIC)?;
    let (lat_min, lat_max, lon_min, lon_max) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
    let n_lat = r.u32()? as usize;
    let n_lon = r.u32()? as usize;
    let domain = GridDomain::new(lat_min, lat_max, lon_min, lon_max, n_lat, n_lon)?;
    let stride = r.u32()?;
    let f = r.u32()? as usize;
    let t = r.u64()? as usize;
    let n = r.u64()? as usize;
    if n != domain.node_count() {
        return Err(Error::format(
            "binary dataset",
            format!("header N={n} but domain has {} nodes", domain.node_count()),
        ));
    }
    let start = DateTime::from_timestamp(r.i64()?, 0)
        .ok_or_else(|| Error::format("binary dataset", "start time out of range"))?
        .naive_utc();
    let mut vars = Vec::with_capacity(f);
    for _ in 0..f {
        let len = r.u8()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::format("binary dataset", "variable name not utf-8"))?;
        vars.push(name.parse::<Variable>()?);
    }
    let total = t
        .checked_mul(n)
        .and_then(|x| x.checked_mul(f))
        .ok_or_else(|| Error::format("binary dataset", "size overflow"))?;
    let values = r.f64_vec(total)?;
    r.finish()?;
    Dataset::new(domain, vars, start, stride, t, values)
}
