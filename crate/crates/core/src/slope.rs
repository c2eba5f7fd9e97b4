//! Metric slopes `|grad v|`, `|grad+ v|`, `|grad- v|` of grid fields as sup
//! difference quotients over shrinking intrinsic balls, and the discrete
//! residual of `u_t + |grad u|^2 / 2 + V = 0`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::field::BoundField;
use crate::grid::NetworkGrid;
use crate::network::NetworkPoint;
use crate::solver::ValueFunction;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SlopeError {
    #[error("radius {radius} is below twice the grid spacing {dx}")]
    RadiusBelowResolution { radius: f64, dx: f64 },
    #[error("radii must be positive and strictly decreasing")]
    InvalidRadii,
    #[error("node {0} is not on the grid")]
    UnknownNode(usize),
    #[error("no edge-interior node is at least {0} away from every vertex")]
    NoInteriorNodes(f64),
    #[error("time window [{0}, {1}] contains no interior stored time")]
    EmptyTimeWindow(f64, f64),
}

impl SlopeError {
    pub fn kind(&self) -> &'static str {
        match self {
            SlopeError::RadiusBelowResolution { .. } => "RadiusBelowResolution",
            SlopeError::InvalidRadii => "InvalidRadii",
            SlopeError::UnknownNode(_) => "UnknownNode",
            SlopeError::NoInteriorNodes(_) => "NoInteriorNodes",
            SlopeError::EmptyTimeWindow(..) => "EmptyTimeWindow",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeEstimate {
    pub node: usize,
    pub point: NetworkPoint,
    /// Vertex slopes are reported but not meaningful for assertions.
    pub at_vertex: bool,
    pub radii: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    pub full: Vec<f64>,
}

impl SlopeEstimate {
    /// Values at the smallest radius.
    pub fn upper_limit(&self) -> f64 {
        *self.upper.last().expect("non-empty ladder")
    }

    pub fn lower_limit(&self) -> f64 {
        *self.lower.last().expect("non-empty ladder")
    }

    pub fn full_limit(&self) -> f64 {
        *self.full.last().expect("non-empty ladder")
    }
}

/// `{8, 4, 2} * dx`.
pub fn default_radii(dx: f64) -> Vec<f64> {
    vec![8.0 * dx, 4.0 * dx, 2.0 * dx]
}

/// Sup difference quotients of `values` at `node` over the intrinsic balls
/// of the given decreasing radii.
pub fn estimate_slopes(grid: &NetworkGrid, values: &[f64], node: usize, radii: &[f64]) -> Result<SlopeEstimate, SlopeError> {
    if node >= grid.len() {
        return Err(SlopeError::UnknownNode(node));
    }
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(SlopeError::InvalidRadii);
    }
    let smallest = *radii.last().unwrap();
    let dx = grid.dx();
    if smallest < 2.0 * dx * (1.0 - 1e-12) {
        return Err(SlopeError::RadiusBelowResolution { radius: smallest, dx });
    }
    let near = grid.nodes_within(node, radii[0]);
    let v0 = values[node];
    let mut upper = vec![0.0_f64; radii.len()];
    let mut lower = vec![0.0_f64; radii.len()];
    let mut full = vec![0.0_f64; radii.len()];
    for (j, d) in near {
        if j == node || d <= 0.0 {
            continue;
        }
        let diff = values[j] - v0;
        let (plus, minus) = (diff.max(0.0) / d, (-diff).max(0.0) / d);
        let abs = diff.abs() / d;
        for (k, &r) in radii.iter().enumerate() {
            if d <= r * (1.0 + 1e-12) {
                upper[k] = upper[k].max(plus);
                lower[k] = lower[k].max(minus);
                full[k] = full[k].max(abs);
            }
        }
    }
    Ok(SlopeEstimate { node, point: grid.node(node), at_vertex: grid.is_vertex(node), radii: radii.to_vec(), upper, lower, full })
}

/// Nodes on edge interiors at least `margin` away from every vertex.
pub fn interior_nodes(grid: &NetworkGrid, margin: f64) -> Vec<usize> {
    let net = grid.network();
    (0..grid.len())
        .filter(|&i| {
            let p = grid.node(i);
            !grid.is_vertex(i) && p.s.min(net.edge_length(p.edge) - p.s) >= margin * (1.0 - 1e-12)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualEntry {
    pub node: usize,
    pub edge: usize,
    pub s: f64,
    pub x: Vec<f64>,
    pub t: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub entries: Vec<ResidualEntry>,
    pub max: f64,
    pub mean: f64,
}

impl ResidualReport {
    fn from_entries(entries: Vec<ResidualEntry>) -> Self {
        let max = entries.iter().map(|e| e.residual).fold(0.0, f64::max);
        let mean = if entries.is_empty() { 0.0 } else { entries.iter().map(|e| e.residual).sum::<f64>() / entries.len() as f64 };
        ResidualReport { entries, max, mean }
    }

    /// Statistics restricted to the entries accepted by `keep`.
    pub fn restricted(&self, keep: impl Fn(&ResidualEntry) -> bool) -> ResidualReport {
        Self::from_entries(self.entries.iter().filter(|e| keep(e)).cloned().collect())
    }

    /// CSV with header `edge,s,t,residual`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("edge,s,t,residual\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{},{}\n", e.edge, e.s, e.t, e.residual));
        }
        out
    }
}

/// `|D_t u + |grad u|^2 / 2 + V(x)|` at edge-interior nodes at least `2 dx`
/// from every vertex and at stored times inside `window` other than the
/// first and last, with `D_t` a centered difference and `|grad u|` the slope
/// at the smallest radius of the default ladder.
pub fn pde_residual(vf: &ValueFunction, potential: &BoundField, window: (f64, f64)) -> Result<ResidualReport, SlopeError> {
    let grid = vf.grid();
    let dx = grid.dx();
    let nodes = interior_nodes(grid, 2.0 * dx);
    if nodes.is_empty() {
        return Err(SlopeError::NoInteriorNodes(2.0 * dx));
    }
    let times = vf.times();
    let steps: Vec<usize> = (1..times.len().saturating_sub(1)).filter(|&k| times[k] >= window.0 && times[k] <= window.1).collect();
    if steps.is_empty() {
        return Err(SlopeError::EmptyTimeWindow(window.0, window.1));
    }
    let radii = [2.0 * dx];
    let v: Vec<f64> = nodes.iter().map(|&i| potential.value_with_coords(grid.node(i), grid.coords(i))).collect();
    let entries: Vec<ResidualEntry> = steps
        .par_iter()
        .flat_map_iter(|&k| {
            let (prev, next) = (vf.at(k - 1), vf.at(k + 1));
            let dt = times[k + 1] - times[k - 1];
            let now = vf.at(k);
            nodes
                .iter()
                .zip(&v)
                .map(|(&i, &vx)| {
                    let slope = estimate_slopes(grid, now, i, &radii).expect("radius is at the resolution limit").full_limit();
                    let dtu = (next[i] - prev[i]) / dt;
                    let p = grid.node(i);
                    ResidualEntry { node: i, edge: p.edge, s: p.s, x: grid.coords(i).to_vec(), t: times[k], residual: (dtu + 0.5 * slope * slope + vx).abs() }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(ResidualReport::from_entries(entries))
}
