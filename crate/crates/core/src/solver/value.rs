use std::fmt::Write as _;
use std::sync::Arc;

use super::{SolverError, SolverMeta};
use crate::grid::NetworkGrid;
use crate::network::NetworkPoint;

/// Samples `u(t, node)` on a grid at increasing times starting at 0.
#[derive(Debug, Clone)]
pub struct ValueFunction {
    grid: Arc<NetworkGrid>,
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    meta: SolverMeta,
}

impl ValueFunction {
    pub fn new(grid: Arc<NetworkGrid>, times: Vec<f64>, values: Vec<Vec<f64>>, meta: SolverMeta) -> Self {
        debug_assert_eq!(times.len(), values.len());
        debug_assert!(values.iter().all(|row| row.len() == grid.len() && row.iter().all(|v| v.is_finite())));
        ValueFunction { grid, times, values, meta }
    }

    pub fn grid(&self) -> &Arc<NetworkGrid> {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Values at stored time index `k`.
    pub fn at(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    pub fn meta(&self) -> &SolverMeta {
        &self.meta
    }

    pub fn tolerance(&self) -> f64 {
        self.meta.tolerance
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("at least the initial time")
    }

    /// Index of the stored time closest to `t` (earlier one on ties).
    pub fn nearest_time(&self, t: f64) -> Result<usize, SolverError> {
        let max = self.horizon();
        if !(t >= 0.0 && t <= max * (1.0 + 1e-12)) {
            return Err(SolverError::TimeOutOfRange { t, max });
        }
        let k = self.times.partition_point(|&s| s < t);
        Ok(match k {
            0 => 0,
            k if k == self.times.len() => k - 1,
            k => {
                if t - self.times[k - 1] <= self.times[k] - t {
                    k - 1
                } else {
                    k
                }
            }
        })
    }

    /// `u` at the stored time nearest `t`, interpolated linearly in arclength
    /// between the two grid nodes bracketing `p` on its edge.
    pub fn evaluate(&self, t: f64, p: NetworkPoint) -> Result<f64, SolverError> {
        let k = self.nearest_time(t)?;
        let net = self.grid.network();
        if p.edge >= net.num_edges() || !(p.s >= -net.eps() && p.s <= net.edge_length(p.edge) + net.eps()) {
            return Err(SolverError::ForeignPoint(p));
        }
        let (a, b, w) = self.grid.bracket(p);
        let row = &self.values[k];
        Ok(if w == 0.0 {
            row[a]
        } else if w == 1.0 {
            row[b]
        } else {
            (1.0 - w) * row[a] + w * row[b]
        })
    }

    /// CSV rows `t,edge,s,x1..xd,u` for every stored time and node.
    pub fn to_csv(&self) -> String {
        let dim = self.grid.network().dim();
        let mut out = String::from("t,edge,s");
        for k in 1..=dim {
            write!(out, ",x{k}").unwrap();
        }
        out.push_str(",u\n");
        for (t, row) in self.times.iter().zip(&self.values) {
            for (i, u) in row.iter().enumerate() {
                let p = self.grid.node(i);
                write!(out, "{t},{},{}", p.edge, p.s).unwrap();
                for x in self.grid.coords(i) {
                    write!(out, ",{x}").unwrap();
                }
                writeln!(out, ",{u}").unwrap();
            }
        }
        out
    }

    /// Rebuilds a value function written by [`to_csv`](Self::to_csv) on the same grid.
    pub fn from_csv(grid: Arc<NetworkGrid>, meta: SolverMeta, text: &str) -> Result<Self, SolverError> {
        let rows = read_value_csv(text)?;
        let n = grid.len();
        if n == 0 || rows.len() % n != 0 {
            return Err(SolverError::GridMismatch);
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for chunk in rows.chunks(n) {
            let t = chunk[0].t;
            for (i, r) in chunk.iter().enumerate() {
                let p = grid.node(i);
                if r.t != t || r.edge != p.edge || (r.s - p.s).abs() > 1e-12 * (1.0 + p.s.abs()) {
                    return Err(SolverError::GridMismatch);
                }
            }
            times.push(t);
            values.push(chunk.iter().map(|r| r.u).collect());
        }
        super::check_times(&times)?;
        Ok(ValueFunction::new(grid, times, values, meta))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueCsvRow {
    pub t: f64,
    pub edge: usize,
    pub s: f64,
    pub x: Vec<f64>,
    pub u: f64,
}

/// Parses the `t,edge,s,x1..xd,u` table.
pub fn read_value_csv(text: &str) -> Result<Vec<ValueCsvRow>, SolverError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| SolverError::Parse("empty table".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 5 || cols[..3] != ["t", "edge", "s"] || cols.last() != Some(&"u") {
        return Err(SolverError::Parse(format!("unexpected header {header:?}")));
    }
    let dim = cols.len() - 4;
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let bad = || SolverError::Parse(format!("line {}: {line:?}", i + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != cols.len() {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(ValueCsvRow {
                t: num(f[0])?,
                edge: f[1].parse().map_err(|_| bad())?,
                s: num(f[2])?,
                x: f[3..3 + dim].iter().map(|s| num(s)).collect::<Result<_, _>>()?,
                u: num(f[3 + dim])?,
            })
        })
        .collect()
}
