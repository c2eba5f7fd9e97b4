//! Intrinsic (shortest-path) distance on a network.
//!
//! All-pairs vertex distances are computed once; a point-to-point query is
//! then the best of the direct same-edge arc and the four endpoint routes.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::network::{EmbeddedNetwork, NetworkError, NetworkPoint};

/// Relative slack used when matching path lengths against table entries.
const PATH_REL_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("point {0:?} does not belong to this network")]
    ForeignPoint(NetworkPoint),
    #[error("consecutive path points {0} and {1} do not share an edge")]
    DiscontinuousPath(usize, usize),
    #[error("timestamps must be strictly increasing (violated at index {0})")]
    NonMonotoneTime(usize),
    #[error("expected {expected} timestamps, got {found}")]
    TimestampCount { expected: usize, found: usize },
    #[error("distance table violates {0}")]
    InvariantViolation(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

impl MetricError {
    pub fn kind(&self) -> &'static str {
        match self {
            MetricError::ForeignPoint(_) => "ForeignPoint",
            MetricError::DiscontinuousPath(..) => "DiscontinuousPath",
            MetricError::NonMonotoneTime(_) => "NonMonotoneTime",
            MetricError::TimestampCount { .. } => "TimestampCount",
            MetricError::InvariantViolation(_) => "InvariantViolation",
            MetricError::Network(e) => e.kind(),
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source Dijkstra over a weighted adjacency list, stopping at `limit`.
fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize, limit: f64) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::from([HeapItem(0.0, source)]);
    while let Some(HeapItem(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(w, len) in &adj[u] {
            let nd = d + len;
            if nd < dist[w] && nd <= limit {
                dist[w] = nd;
                heap.push(HeapItem(nd, w));
            }
        }
    }
    dist
}

/// Intrinsic distance queries over one network.
#[derive(Debug, Clone)]
pub struct MetricOracle {
    network: Arc<EmbeddedNetwork>,
    vertex_dist: Vec<f64>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

/// Distances from a fixed point to every vertex, used to evaluate many
/// distances from the same source cheaply.
#[derive(Debug, Clone)]
pub struct DistanceRow {
    pub source: NetworkPoint,
    pub to_vertex: Vec<f64>,
}

impl MetricOracle {
    /// All-pairs shortest paths on the vertex graph with edge weight equal
    /// to segment length.
    pub fn build(network: Arc<EmbeddedNetwork>) -> Self {
        let nv = network.num_vertices();
        let mut adjacency = vec![Vec::new(); nv];
        for (e, &[a, b]) in network.edges().iter().enumerate() {
            let len = network.edge_length(e);
            adjacency[a].push((b, len));
            adjacency[b].push((a, len));
        }
        let rows: Vec<Vec<f64>> = (0..nv).into_par_iter().map(|s| dijkstra(&adjacency, s, f64::INFINITY)).collect();
        let mut vertex_dist = vec![0.0; nv * nv];
        for i in 0..nv {
            for j in i + 1..nv {
                let d = rows[i][j].min(rows[j][i]);
                vertex_dist[i * nv + j] = d;
                vertex_dist[j * nv + i] = d;
            }
        }
        let oracle = MetricOracle { network, vertex_dist, adjacency };
        debug_assert!(oracle.verify_table().is_ok());
        oracle
    }

    pub fn network(&self) -> &Arc<EmbeddedNetwork> {
        &self.network
    }

    pub fn adjacency(&self) -> &[Vec<(usize, f64)>] {
        &self.adjacency
    }

    pub fn vertex_distance(&self, u: usize, v: usize) -> f64 {
        self.vertex_dist[u * self.network.num_vertices() + v]
    }

    /// Symmetry, zero diagonal, triangle inequality (all triples for up to 64
    /// vertices, a deterministic sample otherwise) and chord domination.
    pub fn verify_table(&self) -> Result<(), MetricError> {
        let nv = self.network.num_vertices();
        let d = |i: usize, j: usize| self.vertex_distance(i, j);
        for i in 0..nv {
            if d(i, i) != 0.0 {
                return Err(MetricError::InvariantViolation(format!("zero diagonal at {i}")));
            }
            for j in 0..nv {
                if d(i, j) != d(j, i) {
                    return Err(MetricError::InvariantViolation(format!("symmetry at ({i},{j})")));
                }
                let chord = crate::geometry::dist(self.network.vertex(i), self.network.vertex(j));
                if d(i, j) < chord * (1.0 - PATH_REL_TOL) {
                    return Err(MetricError::InvariantViolation(format!("chord domination at ({i},{j})")));
                }
            }
        }
        let check = |i: usize, j: usize, k: usize| {
            if d(i, k) > d(i, j) + d(j, k) + 1e-12 * (1.0 + d(i, k)) {
                Err(MetricError::InvariantViolation(format!("triangle inequality at ({i},{j},{k})")))
            } else {
                Ok(())
            }
        };
        if nv <= 64 {
            for i in 0..nv {
                for j in 0..nv {
                    for k in 0..nv {
                        check(i, j, k)?;
                    }
                }
            }
        } else {
            let mut state = 0x9e37_79b9_7f4a_7c15_u64;
            let mut next = || {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state % nv as u64) as usize
            };
            for _ in 0..20_000 {
                let (i, j, k) = (next(), next(), next());
                check(i, j, k)?;
            }
        }
        Ok(())
    }

    fn check(&self, p: NetworkPoint) -> Result<(), MetricError> {
        let net = &self.network;
        if p.edge >= net.num_edges() || !(p.s >= -net.eps() && p.s <= net.edge_length(p.edge) + net.eps()) {
            return Err(MetricError::ForeignPoint(p));
        }
        Ok(())
    }

    /// Intrinsic distance between two points of the network.
    pub fn distance(&self, p: NetworkPoint, q: NetworkPoint) -> Result<f64, MetricError> {
        self.check(p)?;
        self.check(q)?;
        // Evaluate in a fixed argument order so that the result is exactly symmetric.
        let (p, q) = if (p.edge, p.s.to_bits()) <= (q.edge, q.s.to_bits()) { (p, q) } else { (q, p) };
        Ok(self.distance_unchecked(p, q))
    }

    fn distance_unchecked(&self, p: NetworkPoint, q: NetworkPoint) -> f64 {
        let net = &self.network;
        let [pa, pb] = net.edge(p.edge);
        let [qa, qb] = net.edge(q.edge);
        let (lp, lq) = (net.edge_length(p.edge), net.edge_length(q.edge));
        let mut best = f64::INFINITY;
        if p.edge == q.edge {
            best = (p.s - q.s).abs();
        }
        for (u, cu) in [(pa, p.s), (pb, lp - p.s)] {
            for (v, cv) in [(qa, q.s), (qb, lq - q.s)] {
                best = best.min(cu + self.vertex_distance(u, v) + cv);
            }
        }
        best.max(0.0)
    }

    /// Distances from `p` to all vertices.
    pub fn row_from(&self, p: NetworkPoint) -> Result<DistanceRow, MetricError> {
        self.check(p)?;
        let net = &self.network;
        let nv = net.num_vertices();
        let [a, b] = net.edge(p.edge);
        let (ca, cb) = (p.s, net.edge_length(p.edge) - p.s);
        let to_vertex = (0..nv)
            .map(|v| {
                let mut d = (ca + self.vertex_distance(a, v)).min(cb + self.vertex_distance(b, v));
                if v == a {
                    d = d.min(ca);
                }
                if v == b {
                    d = d.min(cb);
                }
                d
            })
            .collect();
        Ok(DistanceRow { source: p, to_vertex })
    }

    /// Distance from the row's source to `q`, using the precomputed row.
    pub fn distance_from_row(&self, row: &DistanceRow, q: NetworkPoint) -> f64 {
        let net = &self.network;
        let [qa, qb] = net.edge(q.edge);
        let lq = net.edge_length(q.edge);
        let mut d = (row.to_vertex[qa] + q.s).min(row.to_vertex[qb] + lq - q.s);
        if q.edge == row.source.edge {
            d = d.min((q.s - row.source.s).abs());
        }
        d.max(0.0)
    }

    fn within(&self, a: f64, b: f64) -> bool {
        (a - b).abs() <= PATH_REL_TOL * (1.0 + a.abs().max(b.abs()))
    }

    /// Lexicographically smallest shortest vertex path from `u` to `v`.
    fn vertex_route(&self, u: usize, v: usize) -> Vec<usize> {
        let mut route = vec![u];
        let mut cur = u;
        while cur != v {
            let target = self.vertex_distance(cur, v);
            let next = self.adjacency[cur]
                .iter()
                .filter(|&&(w, len)| self.within(len + self.vertex_distance(w, v), target))
                .map(|&(w, _)| w)
                .min()
                .expect("a shortest-path successor exists on a connected network");
            route.push(next);
            cur = next;
        }
        route
    }

    /// A shortest path from `p` to `q`; among equal-length paths the one with
    /// the lexicographically smallest vertex sequence.
    pub fn geodesic(&self, p: NetworkPoint, q: NetworkPoint) -> Result<NetworkPath, MetricError> {
        let target = self.distance(p, q)?;
        let net = &self.network;
        let p = net.canonicalize(p)?;
        let q = net.canonicalize(q)?;
        let (pv, qv) = (net.vertex_at(p)?, net.vertex_at(q)?);

        let mut best: Option<Vec<usize>> = None;
        // Direct arc on a common edge (covers the trivial p = q case).
        let common = self.common_edge(p, q)?;
        if let Some((_, sp, sq)) = common {
            if self.within((sp - sq).abs(), target) {
                best = Some(Vec::new());
            }
        }
        if best.is_none() {
            let ends = |x: NetworkPoint, xv: Option<usize>| -> Vec<(usize, f64)> {
                match xv {
                    Some(v) => vec![(v, 0.0)],
                    None => {
                        let [a, b] = net.edge(x.edge);
                        vec![(a, x.s), (b, net.edge_length(x.edge) - x.s)]
                    }
                }
            };
            for (u, cu) in ends(p, pv) {
                for (v, cv) in ends(q, qv) {
                    if self.within(cu + self.vertex_distance(u, v) + cv, target) {
                        let route = self.vertex_route(u, v);
                        if best.as_ref().is_none_or(|b| route < *b) {
                            best = Some(route);
                        }
                    }
                }
            }
        }
        let route = best.expect("the distance is realised by one of the candidate routes");
        let mut points = vec![p];
        for v in route {
            let vp = net.vertex_point(v);
            if points.last() != Some(&vp) {
                points.push(vp);
            }
        }
        if points.last() != Some(&q) || points.len() == 1 && p != q {
            points.push(q);
        }
        NetworkPath::new(net, points)
    }

    /// An edge containing both points, with their arclengths on it.
    fn common_edge(&self, a: NetworkPoint, b: NetworkPoint) -> Result<Option<(usize, f64, f64)>, MetricError> {
        common_edge(&self.network, a, b)
    }

    /// Distance table as CSV rows `i,j,dist` for `i <= j`.
    pub fn distance_table_csv(&self) -> String {
        let nv = self.network.num_vertices();
        let mut out = String::from("i,j,dist\n");
        for i in 0..nv {
            for j in i..nv {
                writeln!(out, "{i},{j},{}", self.vertex_distance(i, j)).unwrap();
            }
        }
        out
    }
}

/// Edges through `x`: every incident edge for a vertex, its own edge otherwise.
fn edges_through(net: &EmbeddedNetwork, x: NetworkPoint) -> Result<Vec<(usize, f64)>, NetworkError> {
    Ok(match net.vertex_at(x)? {
        Some(v) => net
            .incident_edges(v)
            .iter()
            .map(|&e| (e, if net.edge(e)[0] == v { 0.0 } else { net.edge_length(e) }))
            .collect(),
        None => vec![(x.edge, x.s)],
    })
}

fn common_edge(net: &EmbeddedNetwork, a: NetworkPoint, b: NetworkPoint) -> Result<Option<(usize, f64, f64)>, MetricError> {
    let ea = edges_through(net, a)?;
    let eb = edges_through(net, b)?;
    for &(e, sa) in &ea {
        if let Some(&(_, sb)) = eb.iter().find(|(f, _)| *f == e) {
            return Ok(Some((e, sa, sb)));
        }
    }
    Ok(None)
}

/// A polyline on the network through consecutive co-edge points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkPath {
    pub points: Vec<NetworkPoint>,
    pub length: f64,
}

impl NetworkPath {
    pub fn new(net: &EmbeddedNetwork, points: Vec<NetworkPoint>) -> Result<Self, MetricError> {
        let length = curve_length(net, &points)?;
        Ok(NetworkPath { points, length })
    }

    /// Geodesic export: a JSON list of `{edge, s}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.points).expect("points serialize")
    }
}

/// Per-step arclength gaps of a polyline; fails if two consecutive points
/// have no edge in common.
fn gaps(net: &EmbeddedNetwork, points: &[NetworkPoint]) -> Result<Vec<f64>, MetricError> {
    points
        .windows(2)
        .enumerate()
        .map(|(i, w)| match common_edge(net, w[0], w[1])? {
            Some((_, sa, sb)) => Ok((sa - sb).abs()),
            None => Err(MetricError::DiscontinuousPath(i, i + 1)),
        })
        .collect()
}

/// Length of a polyline on the network. On straight edges the supremum over
/// partitions is attained by the polyline's own breakpoints.
pub fn curve_length(net: &EmbeddedNetwork, points: &[NetworkPoint]) -> Result<f64, MetricError> {
    Ok(gaps(net, points)?.iter().sum())
}

/// Piecewise-constant metric speed `gap / dt` along a timed polyline.
pub fn metric_speed(net: &EmbeddedNetwork, path: &NetworkPath, timestamps: &[f64]) -> Result<Vec<f64>, MetricError> {
    if timestamps.len() != path.points.len() {
        return Err(MetricError::TimestampCount { expected: path.points.len(), found: timestamps.len() });
    }
    if let Some(i) = timestamps.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(MetricError::NonMonotoneTime(i + 1));
    }
    Ok(gaps(net, &path.points)?.iter().zip(timestamps.windows(2)).map(|(g, w)| g / (w[1] - w[0])).collect())
}

/// Sampled ratios `delta(p, q) / |p - q|` between vertices and edge midpoints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioSample {
    pub pairs: usize,
    pub max: f64,
    pub mean: f64,
}

/// Ratio of intrinsic to Euclidean distance over pairs of up to `count`
/// deterministic sample points. Reported only; no bound is implied.
pub fn intrinsic_ratio_sample(oracle: &MetricOracle, count: usize) -> RatioSample {
    let net = oracle.network();
    let mut samples: Vec<NetworkPoint> = (0..net.num_vertices()).map(|v| net.vertex_point(v)).collect();
    samples.extend((0..net.num_edges()).map(|e| NetworkPoint::new(e, 0.5 * net.edge_length(e))));
    let stride = samples.len().div_ceil(count.max(2)).max(1);
    let samples: Vec<NetworkPoint> = samples.into_iter().step_by(stride).collect();
    let coords: Vec<Vec<f64>> = samples.iter().map(|&p| net.embed(p).expect("sample lies on the network")).collect();
    let (mut pairs, mut max, mut sum) = (0, 0.0_f64, 0.0);
    for i in 0..samples.len() {
        let row = oracle.row_from(samples[i]).expect("sample lies on the network");
        for j in i + 1..samples.len() {
            let euclid = crate::geometry::dist(&coords[i], &coords[j]);
            if euclid <= net.eps() {
                continue;
            }
            let ratio = oracle.distance_from_row(&row, samples[j]) / euclid;
            pairs += 1;
            max = max.max(ratio);
            sum += ratio;
        }
    }
    RatioSample { pairs, max, mean: if pairs == 0 { 0.0 } else { sum / pairs as f64 } }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::validate_network;

    fn triangle() -> Arc<EmbeddedNetwork> {
        let h = 3f64.sqrt() / 2.0;
        Arc::new(validate_network(2, &[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, h]], &[[0, 1], [1, 2], [0, 2]]).unwrap())
    }

    fn interval(points: &[f64]) -> Arc<EmbeddedNetwork> {
        let v: Vec<Vec<f64>> = points.iter().map(|&x| vec![x]).collect();
        let e: Vec<[usize; 2]> = (0..points.len() - 1).map(|i| [i, i + 1]).collect();
        Arc::new(validate_network(1, &v, &e).unwrap())
    }

    #[test]
    fn dyadic_vertex_distance() {
        let o = MetricOracle::build(interval(&[0.0, 0.5, 0.75]));
        assert!((o.vertex_distance(0, 2) - 0.75).abs() < 1e-15);
        o.verify_table().unwrap();
    }

    #[test]
    fn triangle_distances() {
        let o = MetricOracle::build(triangle());
        assert!((o.vertex_distance(0, 1) - 1.0).abs() < 1e-15);
        // Midpoint of a1a2 (edge 0) to midpoint of a1a3 (edge 2), via a1.
        let d = o.distance(NetworkPoint::new(0, 0.5), NetworkPoint::new(2, 0.5)).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
        let p = NetworkPoint::new(1, 0.3);
        assert_eq!(o.distance(p, p).unwrap(), 0.0);
        assert_eq!(o.distance(NetworkPoint::new(7, 0.0), p).unwrap_err().kind(), "ForeignPoint");
    }

    #[test]
    fn dyadic_point_distance_is_absolute_difference() {
        let n = 6;
        let xs: Vec<f64> = (0..=n).map(|i| 1.0 - 0.5f64.powi(i)).collect();
        let net = interval(&xs);
        let o = MetricOracle::build(net.clone());
        let p = net.locate_point(&[0.0], 1e-12).unwrap();
        let q = net.locate_point(&[1.0 - 0.5f64.powi(n)], 1e-12).unwrap();
        assert!((o.distance(p, q).unwrap() - (1.0 - 0.5f64.powi(n))).abs() < 1e-15);
    }

    #[test]
    fn geodesics() {
        let o = MetricOracle::build(triangle());
        let g = o.geodesic(NetworkPoint::new(0, 0.2), NetworkPoint::new(0, 0.7)).unwrap();
        assert_eq!(g.points.len(), 2);
        assert!((g.length - 0.5).abs() < 1e-15);
        let g = o.geodesic(NetworkPoint::new(0, 0.5), NetworkPoint::new(2, 0.5)).unwrap();
        assert!((g.length - 1.0).abs() < 1e-15);
        let via: Vec<_> = g.points.iter().filter_map(|&p| o.network().vertex_at(p).unwrap()).collect();
        assert_eq!(via, vec![0]);

        let xs: Vec<f64> = (0..=3).map(|i| 1.0 - 0.5f64.powi(i)).collect();
        let t3 = interval(&xs);
        let o = MetricOracle::build(t3.clone());
        let g = o.geodesic(t3.vertex_point(0), t3.vertex_point(3)).unwrap();
        let via: Vec<_> = g.points.iter().filter_map(|&p| t3.vertex_at(p).unwrap()).collect();
        assert_eq!(via, vec![0, 1, 2, 3]);
        assert!((g.length - 0.875).abs() < 1e-15);
    }

    #[test]
    fn curve_lengths() {
        let net = triangle();
        let l = curve_length(&net, &[NetworkPoint::new(0, 0.1), NetworkPoint::new(0, 0.4)]).unwrap();
        assert!((l - 0.3).abs() < 1e-15);
        assert_eq!(curve_length(&net, &[NetworkPoint::new(1, 0.2)]).unwrap(), 0.0);
        let err = curve_length(&net, &[NetworkPoint::new(0, 0.5), NetworkPoint::new(1, 0.5)]).unwrap_err();
        assert_eq!(err, MetricError::DiscontinuousPath(0, 1));
    }

    #[test]
    fn speeds() {
        let net = interval(&[0.0, 1.0]);
        let path = NetworkPath::new(&net, vec![NetworkPoint::new(0, 0.0), NetworkPoint::new(0, 0.5), NetworkPoint::new(0, 1.0)]).unwrap();
        assert_eq!(metric_speed(&net, &path, &[0.0, 0.5, 1.0]).unwrap(), vec![1.0, 1.0]);
        let still = NetworkPath::new(&net, vec![NetworkPoint::new(0, 0.3), NetworkPoint::new(0, 0.3)]).unwrap();
        assert_eq!(metric_speed(&net, &still, &[0.0, 1.0]).unwrap(), vec![0.0]);
        let half = interval(&[0.0, 0.5]);
        let path = NetworkPath::new(&half, vec![half.vertex_point(0), half.vertex_point(1)]).unwrap();
        assert_eq!(metric_speed(&half, &path, &[0.0, 0.25]).unwrap(), vec![2.0]);
        assert_eq!(metric_speed(&half, &path, &[0.0, 0.0]).unwrap_err(), MetricError::NonMonotoneTime(1));
    }

    #[test]
    fn table_csv() {
        let o = MetricOracle::build(interval(&[0.0, 0.5, 0.75]));
        let csv = o.distance_table_csv();
        assert!(csv.starts_with("i,j,dist\n0,0,0\n0,1,0.5\n"));
        assert_eq!(csv.lines().count(), 1 + 6);
    }

    #[test]
    fn ratio_sample_on_triangle() {
        let o = MetricOracle::build(triangle());
        let r = intrinsic_ratio_sample(&o, 100);
        // Corners and midpoints: 15 pairs, the worst being two midpoints (1 / 0.5).
        assert_eq!(r.pairs, 15);
        assert!((r.max - 2.0).abs() < 1e-12);
        assert!(r.mean >= 1.0);
    }
}
