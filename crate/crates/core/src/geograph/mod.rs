//! Spatial graph over grid points.
//!
//! Two nodes are joined when their great-circle distance is at most the
//! threshold (inclusive). Edges are unweighted; [`NormAdj`] is the
//! symmetric renormalized adjacency `D^-1/2 (A + I) D^-1/2`.

mod normadj;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::griddata::{GridDomain, LatLon};

pub use normadj::{normalize_adjacency, NormAdj};

/// Mean Earth radius.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Above this node count the neighbour search sorts by latitude and scans bands.
pub const BRUTE_FORCE_MAX_NODES: usize = 20_000;

/// Great-circle distance in km on a sphere of radius [`EARTH_RADIUS_KM`].
pub fn haversine(a: LatLon, b: LatLon) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = p2 - p1;
    let dlambda = (b.lon - a.lon).to_radians();
    let s = (dphi / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * s.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub km: f64,
}

/// Undirected threshold graph. Edges are stored once with `i < j`, sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    coords: Vec<LatLon>,
    edges: Vec<Edge>,
    dist_km: f64,
    adjacency: Vec<Vec<usize>>,
}

pub fn build_graph(domain: &GridDomain, dist_km: f64) -> Result<Graph> {
    Graph::from_coords(domain.all_coords(), dist_km)
}

impl Graph {
    pub fn from_coords(coords: Vec<LatLon>, dist_km: f64) -> Result<Graph> {
        if !(dist_km > 0.0) || !dist_km.is_finite() {
            return Err(Error::config("dist_km", format!("{dist_km} must be positive")));
        }
        let edges = if coords.len() <= BRUTE_FORCE_MAX_NODES {
            edges_brute_force(&coords, dist_km)
        } else {
            edges_banded(&coords, dist_km)
        };
        let g = Graph::from_parts(coords, edges, dist_km)?;
        let isolated = g.isolated_nodes();
        if !isolated.is_empty() {
            log::warn!(
                "graph at {dist_km} km leaves {} of {} nodes isolated",
                isolated.len(),
                g.node_count()
            );
        }
        Ok(g)
    }

    fn from_parts(coords: Vec<LatLon>, mut edges: Vec<Edge>, dist_km: f64) -> Result<Graph> {
        let n = coords.len();
        let mut adjacency = vec![Vec::new(); n];
        edges.sort_by(|a, b| (a.i, a.j).cmp(&(b.i, b.j)));
        for e in &edges {
            if e.i >= e.j || e.j >= n {
                return Err(Error::format(
                    "edge list",
                    format!("edge ({}, {}) invalid for {n} nodes", e.i, e.j),
                ));
            }
            adjacency[e.i].push(e.j);
            adjacency[e.j].push(e.i);
        }
        if edges.windows(2).any(|w| (w[0].i, w[0].j) == (w[1].i, w[1].j)) {
            return Err(Error::format("edge list", "duplicate edge"));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Graph {
            coords,
            edges,
            dist_km,
            adjacency,
        })
    }

    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[LatLon] {
        &self.coords
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn dist_km(&self) -> f64 {
        self.dist_km
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn isolated_nodes(&self) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&i| self.adjacency[i].is_empty())
            .collect()
    }

    /// `#nodes N`, `#dist_km d`, then `i j distance_km` per edge.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "#nodes {}", self.node_count());
        let _ = writeln!(s, "#dist_km {}", self.dist_km);
        for e in &self.edges {
            let _ = writeln!(s, "{} {} {}", e.i, e.j, e.km);
        }
        s
    }

    /// Parses an edge list; node positions come from the caller.
    pub fn from_edge_list(text: &str, coords: Vec<LatLon>) -> Result<Graph> {
        let mut nodes = None;
        let mut dist = None;
        let mut edges = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = || Error::format("edge list", format!("line {}: `{line}`", k + 1));
            if let Some(rest) = line.strip_prefix("#nodes") {
                nodes = Some(rest.trim().parse::<usize>().map_err(|_| bad())?);
            } else if let Some(rest) = line.strip_prefix("#dist_km") {
                dist = Some(rest.trim().parse::<f64>().map_err(|_| bad())?);
            } else if line.starts_with('#') {
                continue;
            } else {
                let f: Vec<&str> = line.split_whitespace().collect();
                if f.len() != 3 {
                    return Err(bad());
                }
                let (i, j) = (
                    f[0].parse::<usize>().map_err(|_| bad())?,
                    f[1].parse::<usize>().map_err(|_| bad())?,
                );
                let km = f[2].parse::<f64>().map_err(|_| bad())?;
                edges.push(Edge {
                    i: i.min(j),
                    j: i.max(j),
                    km,
                });
            }
        }
        let nodes = nodes.ok_or_else(|| Error::format("edge list", "missing #nodes"))?;
        let dist = dist.ok_or_else(|| Error::format("edge list", "missing #dist_km"))?;
        if nodes != coords.len() {
            return Err(Error::format(
                "edge list",
                format!("{nodes} nodes in file, {} in the domain", coords.len()),
            ));
        }
        Graph::from_parts(coords, edges, dist)
    }
}

fn edges_brute_force(coords: &[LatLon], dist_km: f64) -> Vec<Edge> {
    let mut edges = Vec::new();
    for i in 0..coords.len() {
        for j in i + 1..coords.len() {
            let km = haversine(coords[i], coords[j]);
            if km <= dist_km {
                edges.push(Edge { i, j, km });
            }
        }
    }
    edges
}

/// Sorts by latitude and only compares nodes whose latitude gap could fit under the threshold.
fn edges_banded(coords: &[LatLon], dist_km: f64) -> Vec<Edge> {
    // Great-circle distance is at least R * |dlat|; a small margin absorbs rounding.
    let max_dlat = (dist_km / EARTH_RADIUS_KM).to_degrees() * (1.0 + 1e-9) + 1e-12;
    let mut order: Vec<usize> = (0..coords.len()).collect();
    order.sort_by(|&a, &b| coords[a].lat.total_cmp(&coords[b].lat).then(a.cmp(&b)));
    let mut edges = Vec::new();
    for (k, &a) in order.iter().enumerate() {
        for &b in &order[k + 1..] {
            if coords[b].lat - coords[a].lat > max_dlat {
                break;
            }
            let km = haversine(coords[a], coords[b]);
            if km <= dist_km {
                edges.push(Edge {
                    i: a.min(b),
                    j: a.max(b),
                    km,
                });
            }
        }
    }
    edges.sort_by(|x, y| (x.i, x.j).cmp(&(y.i, y.j)));
    edges
}
