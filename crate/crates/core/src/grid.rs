//! Uniform per-edge discretization of a network.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};
use std::sync::Arc;

use thiserror::Error;

use crate::geometry::{dist, lerp};
use crate::metric::MetricOracle;
use crate::network::{EmbeddedNetwork, NetworkPoint};

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid spacing must be positive and finite, got {0}")]
    InvalidSpacing(f64),
}

impl GridError {
    pub fn kind(&self) -> &'static str {
        match self {
            GridError::InvalidSpacing(_) => "InvalidSpacing",
        }
    }
}

/// Grid nodes on a network: node `i < V` is vertex `i`; each edge is then cut
/// into `ceil(len / dx)` equal pieces whose interior breakpoints follow.
#[derive(Debug, Clone)]
pub struct NetworkGrid {
    oracle: Arc<MetricOracle>,
    dx: f64,
    nodes: Vec<NetworkPoint>,
    coords: Vec<f64>,
    /// Nodes of each edge in arclength order, both endpoint vertices included.
    edge_nodes: Vec<Vec<usize>>,
    /// Step between consecutive nodes on each edge.
    edge_step: Vec<f64>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl NetworkGrid {
    pub fn build(oracle: Arc<MetricOracle>, dx: f64) -> Result<Self, GridError> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(GridError::InvalidSpacing(dx));
        }
        let net = oracle.network().clone();
        let dim = net.dim();
        let mut nodes: Vec<NetworkPoint> = (0..net.num_vertices()).map(|v| net.vertex_point(v)).collect();
        let mut coords: Vec<f64> = net.vertices().flat_map(|v| v.iter().copied()).collect();
        let mut edge_nodes = Vec::with_capacity(net.num_edges());
        let mut edge_step = Vec::with_capacity(net.num_edges());
        for e in 0..net.num_edges() {
            let [a, b] = net.edge(e);
            let len = net.edge_length(e);
            let pieces = ((len / dx) - 1e-9).ceil().max(1.0) as usize;
            let mut on_edge = vec![a];
            for k in 1..pieces {
                let t = k as f64 / pieces as f64;
                nodes.push(NetworkPoint::new(e, t * len));
                coords.extend(lerp(net.vertex(a), net.vertex(b), t));
                on_edge.push(nodes.len() - 1);
            }
            on_edge.push(b);
            edge_nodes.push(on_edge);
            edge_step.push(len / pieces as f64);
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (e, list) in edge_nodes.iter().enumerate() {
            for w in list.windows(2) {
                adjacency[w[0]].push((w[1], edge_step[e]));
                adjacency[w[1]].push((w[0], edge_step[e]));
            }
        }
        debug_assert_eq!(coords.len(), nodes.len() * dim);
        Ok(NetworkGrid { oracle, dx, nodes, coords, edge_nodes, edge_step, adjacency })
    }

    pub fn oracle(&self) -> &Arc<MetricOracle> {
        &self.oracle
    }

    pub fn network(&self) -> &Arc<EmbeddedNetwork> {
        self.oracle.network()
    }

    /// Requested spacing; actual gaps are at most this.
    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn max_gap(&self) -> f64 {
        self.edge_step.iter().copied().fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[NetworkPoint] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> NetworkPoint {
        self.nodes[i]
    }

    pub fn coords(&self, i: usize) -> &[f64] {
        let d = self.network().dim();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn is_vertex(&self, i: usize) -> bool {
        i < self.network().num_vertices()
    }

    pub fn edge_nodes(&self, e: usize) -> &[usize] {
        &self.edge_nodes[e]
    }

    pub fn edge_step(&self, e: usize) -> f64 {
        self.edge_step[e]
    }

    /// Neighbouring nodes along edges, with their spacing.
    pub fn adjacency(&self) -> &[Vec<(usize, f64)>] {
        &self.adjacency
    }

    /// Intrinsic distance from node `i` to every node.
    pub fn distances_from(&self, i: usize) -> Vec<f64> {
        let row = self.oracle.row_from(self.nodes[i]).expect("grid nodes lie on the network");
        self.nodes.iter().map(|&q| self.oracle.distance_from_row(&row, q)).collect()
    }

    /// Nodes within intrinsic distance `radius` of node `i`, with distances,
    /// sorted by node index.
    pub fn nodes_within(&self, i: usize, radius: f64) -> Vec<(usize, f64)> {
        let limit = radius * (1.0 + 1e-12);
        // Dijkstra restricted to the ball, so the cost scales with its size.
        let mut dist: HashMap<usize, f64> = HashMap::from([(i, 0.0)]);
        let mut heap = BinaryHeap::from([Reverse((OrdF64(0.0), i))]);
        while let Some(Reverse((OrdF64(d), u))) = heap.pop() {
            if d > dist[&u] {
                continue;
            }
            for &(w, len) in &self.adjacency[u] {
                let nd = d + len;
                if nd <= limit && dist.get(&w).is_none_or(|&old| nd < old) {
                    dist.insert(w, nd);
                    heap.push(Reverse((OrdF64(nd), w)));
                }
            }
        }
        let mut out: Vec<(usize, f64)> = dist.into_iter().collect();
        out.sort_by_key(|&(j, _)| j);
        out
    }

    /// The node at ambient position `q`, if one lies within `tol`.
    pub fn find_node(&self, q: &[f64], tol: f64) -> Option<usize> {
        let net = self.network();
        let (p, d) = net.closest_point(q);
        if d > tol {
            return None;
        }
        let list = &self.edge_nodes[p.edge];
        let k = (p.s / self.edge_step[p.edge]).round() as usize;
        let candidates = [k.saturating_sub(1), k, (k + 1).min(list.len() - 1)];
        candidates
            .iter()
            .map(|&k| list[k.min(list.len() - 1)])
            .map(|n| (n, dist(self.coords(n), q)))
            .filter(|&(_, d)| d <= tol)
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(n, _)| n)
    }

    /// Position of `p` on its edge's node list: the node index just before
    /// it and the interpolation weight towards the next node.
    pub fn bracket(&self, p: NetworkPoint) -> (usize, usize, f64) {
        let list = &self.edge_nodes[p.edge];
        let h = self.edge_step[p.edge];
        let pos = (p.s / h).clamp(0.0, (list.len() - 1) as f64);
        let k = (pos.floor() as usize).min(list.len() - 2);
        let w = (pos - k as f64).clamp(0.0, 1.0);
        (list[k], list[k + 1], w)
    }
}
