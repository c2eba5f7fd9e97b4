//! Networks: finite unions of straight segments in `R^d` that meet only at
//! shared vertices, plus the `(edge, arclength)` addressing of their points.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry;

/// Default relative tolerance for geometric coincidence, multiplied by the
/// network diameter.
pub const DEFAULT_REL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("network has no edges")]
    EmptyNetwork,
    #[error("vertex {vertex} has {found} coordinates, expected {expected}")]
    DimensionMismatch { vertex: usize, expected: usize, found: usize },
    #[error("vertex {0} has a non-finite coordinate")]
    NonFiniteCoordinate(usize),
    #[error("vertices {0} and {1} coincide")]
    DuplicateVertex(usize, usize),
    #[error("edge {edge} references vertex {vertex}, which does not exist")]
    DanglingEdgeEndpoint { edge: usize, vertex: usize },
    #[error("edge {0} has zero length")]
    ZeroLengthEdge(usize),
    #[error("edges {0} and {1} join the same pair of vertices")]
    DuplicateEdge(usize, usize),
    #[error("vertex {vertex} lies inside edge {edge}")]
    VertexInsideEdge { vertex: usize, edge: usize },
    #[error("edges {first} and {second} intersect away from a shared vertex near {witness:?}")]
    IllegalEdgeIntersection { first: usize, second: usize, witness: Vec<f64> },
    #[error("vertices {0} and {1} are not connected")]
    Disconnected(usize, usize),
    #[error("arclength {s} is outside [0, {len}] on edge {edge}")]
    ParameterOutOfRange { edge: usize, s: f64, len: f64 },
    #[error("edge {0} does not exist")]
    UnknownEdge(usize),
    #[error("point is {distance} away from the network (tolerance {tol})")]
    NotOnNetwork { distance: f64, tol: f64 },
    #[error("invalid network file: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl NetworkError {
    pub fn kind(&self) -> &'static str {
        match self {
            NetworkError::EmptyNetwork => "EmptyNetwork",
            NetworkError::DimensionMismatch { .. } => "DimensionMismatch",
            NetworkError::NonFiniteCoordinate(_) => "NonFiniteCoordinate",
            NetworkError::DuplicateVertex(..) => "DuplicateVertex",
            NetworkError::DanglingEdgeEndpoint { .. } => "DanglingEdgeEndpoint",
            NetworkError::ZeroLengthEdge(_) => "ZeroLengthEdge",
            NetworkError::DuplicateEdge(..) => "DuplicateEdge",
            NetworkError::VertexInsideEdge { .. } => "VertexInsideEdge",
            NetworkError::IllegalEdgeIntersection { .. } => "IllegalEdgeIntersection",
            NetworkError::Disconnected(..) => "Disconnected",
            NetworkError::ParameterOutOfRange { .. } => "ParameterOutOfRange",
            NetworkError::UnknownEdge(_) => "UnknownEdge",
            NetworkError::NotOnNetwork { .. } => "NotOnNetwork",
            NetworkError::Parse(_) => "ParseError",
            NetworkError::Io(_) => "IoError",
        }
    }
}

/// A point of a network, addressed by edge index and arclength measured from
/// the edge's first endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkPoint {
    pub edge: usize,
    pub s: f64,
}

impl NetworkPoint {
    pub fn new(edge: usize, s: f64) -> Self {
        NetworkPoint { edge, s }
    }
}

/// On-disk layout of a network: `{"dim": d, "vertices": [[..]], "edges": [[i, j]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub dim: usize,
    pub vertices: Vec<Vec<f64>>,
    pub edges: Vec<[usize; 2]>,
}

/// A validated network. Immutable once built.
#[derive(Debug, Clone)]
pub struct EmbeddedNetwork {
    dim: usize,
    coords: Vec<f64>,
    edges: Vec<[usize; 2]>,
    lengths: Vec<f64>,
    incident: Vec<Vec<usize>>,
    diameter: f64,
    eps: f64,
}

impl PartialEq for EmbeddedNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.coords == other.coords && self.edges == other.edges
    }
}

/// Validate raw vertex and edge lists with the default tolerance.
pub fn validate_network(dim: usize, vertices: &[Vec<f64>], edges: &[[usize; 2]]) -> Result<EmbeddedNetwork, NetworkError> {
    validate_network_with_tol(dim, vertices, edges, DEFAULT_REL_TOL)
}

/// Validate raw lists; `rel_tol` times the network diameter is the distance
/// below which two geometric objects are considered to touch.
pub fn validate_network_with_tol(
    dim: usize,
    vertices: &[Vec<f64>],
    edges: &[[usize; 2]],
    rel_tol: f64,
) -> Result<EmbeddedNetwork, NetworkError> {
    if edges.is_empty() {
        return Err(NetworkError::EmptyNetwork);
    }
    let mut coords = Vec::with_capacity(vertices.len() * dim);
    for (i, v) in vertices.iter().enumerate() {
        if v.len() != dim || dim == 0 {
            return Err(NetworkError::DimensionMismatch { vertex: i, expected: dim, found: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(NetworkError::NonFiniteCoordinate(i));
        }
        coords.extend_from_slice(v);
    }
    let nv = vertices.len();
    let pt = |i: usize| &coords[i * dim..(i + 1) * dim];

    let mut diameter = 0.0_f64;
    for i in 0..nv {
        for j in i + 1..nv {
            diameter = diameter.max(geometry::dist2(pt(i), pt(j)));
        }
    }
    let diameter = diameter.sqrt();
    let eps = rel_tol * diameter;

    // Vertices, sorted along the first axis so that only nearby pairs are compared.
    let mut order: Vec<usize> = (0..nv).collect();
    order.sort_by(|&a, &b| pt(a)[0].total_cmp(&pt(b)[0]));
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if pt(j)[0] - pt(i)[0] > eps {
                break;
            }
            if geometry::dist(pt(i), pt(j)) <= eps {
                return Err(NetworkError::DuplicateVertex(i.min(j), i.max(j)));
            }
        }
    }

    for (e, &[a, b]) in edges.iter().enumerate() {
        for v in [a, b] {
            if v >= nv {
                return Err(NetworkError::DanglingEdgeEndpoint { edge: e, vertex: v });
            }
        }
    }
    let mut lengths = Vec::with_capacity(edges.len());
    for (e, &[a, b]) in edges.iter().enumerate() {
        let len = geometry::dist(pt(a), pt(b));
        if a == b || len <= eps {
            return Err(NetworkError::ZeroLengthEdge(e));
        }
        lengths.push(len);
    }
    let mut keyed: Vec<((usize, usize), usize)> =
        edges.iter().enumerate().map(|(e, &[a, b])| ((a.min(b), a.max(b)), e)).collect();
    keyed.sort();
    for w in keyed.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(NetworkError::DuplicateEdge(w[0].1, w[1].1));
        }
    }

    check_incidence(dim, &coords, nv, edges, eps)?;

    let mut incident = vec![Vec::new(); nv];
    for (e, &[a, b]) in edges.iter().enumerate() {
        incident[a].push(e);
        incident[b].push(e);
    }
    let mut seen = vec![false; nv];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(v) = queue.pop_front() {
        for &e in &incident[v] {
            let [a, b] = edges[e];
            let w = if a == v { b } else { a };
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    if let Some(unreached) = seen.iter().position(|s| !s) {
        return Err(NetworkError::Disconnected(0, unreached));
    }

    Ok(EmbeddedNetwork { dim, coords, edges: edges.to_vec(), lengths, incident, diameter, eps })
}

/// Vertex-in-edge and edge-edge checks. Items are swept along the first axis;
/// every pair whose extents overlap is tested, so the check is exhaustive.
fn check_incidence(dim: usize, coords: &[f64], nv: usize, edges: &[[usize; 2]], eps: f64) -> Result<(), NetworkError> {
    let pt = |i: usize| &coords[i * dim..(i + 1) * dim];
    #[derive(Clone, Copy)]
    enum Item {
        Vertex(usize),
        Edge(usize),
    }
    let mut items: Vec<(f64, f64, Item)> = (0..nv).map(|v| (pt(v)[0], pt(v)[0], Item::Vertex(v))).collect();
    for (e, &[a, b]) in edges.iter().enumerate() {
        let (x0, x1) = (pt(a)[0], pt(b)[0]);
        items.push((x0.min(x1), x0.max(x1), Item::Edge(e)));
    }
    items.sort_by(|x, y| x.0.total_cmp(&y.0));

    // First pass: vertices inside edges (reported before edge crossings).
    for (k, &(_, hi, item)) in items.iter().enumerate() {
        for &(lo2, _, other) in &items[k + 1..] {
            if lo2 > hi + eps {
                break;
            }
            let (v, e) = match (item, other) {
                (Item::Vertex(v), Item::Edge(e)) | (Item::Edge(e), Item::Vertex(v)) => (v, e),
                _ => continue,
            };
            let [a, b] = edges[e];
            if v != a && v != b && geometry::point_segment_distance(pt(v), pt(a), pt(b)) <= eps {
                return Err(NetworkError::VertexInsideEdge { vertex: v, edge: e });
            }
        }
    }
    for (k, &(_, hi, item)) in items.iter().enumerate() {
        let Item::Edge(e1) = item else { continue };
        for &(lo2, _, other) in &items[k + 1..] {
            if lo2 > hi + eps {
                break;
            }
            let Item::Edge(e2) = other else { continue };
            let [a, b] = edges[e1];
            let [c, d] = edges[e2];
            // A shared endpoint is the only legal contact; with no vertex inside
            // either edge, two straight segments through a common vertex cannot
            // meet anywhere else.
            if a == c || a == d || b == c || b == d {
                continue;
            }
            let (s, _, gap) = geometry::segment_segment_closest(pt(a), pt(b), pt(c), pt(d));
            if gap <= eps {
                let (lo, hi) = (e1.min(e2), e1.max(e2));
                return Err(NetworkError::IllegalEdgeIntersection {
                    first: lo,
                    second: hi,
                    witness: geometry::lerp(pt(a), pt(b), s),
                });
            }
        }
    }
    Ok(())
}

impl EmbeddedNetwork {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.incident.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex(&self, v: usize) -> &[f64] {
        &self.coords[v * self.dim..(v + 1) * self.dim]
    }

    pub fn vertices(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn edge(&self, e: usize) -> [usize; 2] {
        self.edges[e]
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        self.lengths[e]
    }

    pub fn edge_lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn total_length(&self) -> f64 {
        self.lengths.iter().sum()
    }

    pub fn min_edge_length(&self) -> f64 {
        self.lengths.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Edges incident to `v`, in increasing id order.
    pub fn incident_edges(&self, v: usize) -> &[usize] {
        &self.incident[v]
    }

    /// Euclidean diameter of the vertex set (which is the diameter of the network).
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Absolute geometric tolerance `1e-9 * diameter` (or the one chosen at validation).
    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Canonical address of vertex `v`: its lowest incident edge, at the matching end.
    pub fn vertex_point(&self, v: usize) -> NetworkPoint {
        let e = self.incident[v][0];
        let s = if self.edges[e][0] == v { 0.0 } else { self.lengths[e] };
        NetworkPoint { edge: e, s }
    }

    fn check_point(&self, p: NetworkPoint) -> Result<f64, NetworkError> {
        let len = *self.lengths.get(p.edge).ok_or(NetworkError::UnknownEdge(p.edge))?;
        if !(p.s >= -self.eps && p.s <= len + self.eps) {
            return Err(NetworkError::ParameterOutOfRange { edge: p.edge, s: p.s, len });
        }
        Ok(len)
    }

    /// The vertex `p` sits on, if it is an endpoint of its edge.
    pub fn vertex_at(&self, p: NetworkPoint) -> Result<Option<usize>, NetworkError> {
        let len = self.check_point(p)?;
        let [a, b] = self.edges[p.edge];
        Ok(if p.s <= self.eps {
            Some(a)
        } else if p.s >= len - self.eps {
            Some(b)
        } else {
            None
        })
    }

    /// Map endpoint-valued addresses to the vertex's canonical address and
    /// clamp interior points into `[0, len]`.
    pub fn canonicalize(&self, p: NetworkPoint) -> Result<NetworkPoint, NetworkError> {
        let len = self.check_point(p)?;
        Ok(match self.vertex_at(p)? {
            Some(v) => self.vertex_point(v),
            None => NetworkPoint { edge: p.edge, s: p.s.clamp(0.0, len) },
        })
    }

    /// Ambient coordinates of `p`, linear in arclength along the edge.
    pub fn embed(&self, p: NetworkPoint) -> Result<Vec<f64>, NetworkError> {
        let len = self.check_point(p)?;
        let [a, b] = self.edges[p.edge];
        let t = (p.s / len).clamp(0.0, 1.0);
        if t == 0.0 {
            return Ok(self.vertex(a).to_vec());
        }
        if t == 1.0 {
            return Ok(self.vertex(b).to_vec());
        }
        Ok(geometry::lerp(self.vertex(a), self.vertex(b), t))
    }

    /// Euclidean distance from `q` to the network together with the closest
    /// address; ties go to the lowest edge id, then the smallest arclength.
    pub fn closest_point(&self, q: &[f64]) -> (NetworkPoint, f64) {
        let mut best = (NetworkPoint { edge: 0, s: 0.0 }, f64::INFINITY);
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            let (t, d) = geometry::project_to_segment(q, self.vertex(a), self.vertex(b));
            if d < best.1 - self.eps * 1e-3 {
                best = (NetworkPoint { edge: e, s: t * self.lengths[e] }, d);
            }
        }
        best
    }

    /// Address of the point of the network nearest to `q`, which must lie
    /// within `tol` of the network.
    pub fn locate_point(&self, q: &[f64], tol: f64) -> Result<NetworkPoint, NetworkError> {
        if q.len() != self.dim {
            return Err(NetworkError::DimensionMismatch { vertex: 0, expected: self.dim, found: q.len() });
        }
        let (p, d) = self.closest_point(q);
        if d > tol {
            return Err(NetworkError::NotOnNetwork { distance: d, tol });
        }
        self.canonicalize(p)
    }

    /// Canonical form: vertices sorted lexicographically, each edge stored as
    /// `[low, high]`, edges sorted.
    pub fn canonical(&self) -> EmbeddedNetwork {
        let nv = self.num_vertices();
        let mut order: Vec<usize> = (0..nv).collect();
        order.sort_by(|&a, &b| {
            let (pa, pb) = (self.vertex(a), self.vertex(b));
            pa.iter().zip(pb).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut rank = vec![0; nv];
        for (new, &old) in order.iter().enumerate() {
            rank[old] = new;
        }
        let vertices: Vec<Vec<f64>> = order.iter().map(|&v| self.vertex(v).to_vec()).collect();
        let mut edges: Vec<[usize; 2]> = self
            .edges
            .iter()
            .map(|&[a, b]| {
                let (x, y) = (rank[a], rank[b]);
                [x.min(y), x.max(y)]
            })
            .collect();
        edges.sort();
        let rel = if self.diameter > 0.0 { self.eps / self.diameter } else { DEFAULT_REL_TOL };
        validate_network_with_tol(self.dim, &vertices, &edges, rel).expect("relabelling preserves validity")
    }

    pub fn to_file(&self) -> NetworkFile {
        NetworkFile {
            dim: self.dim,
            vertices: self.vertices().map(|v| v.to_vec()).collect(),
            edges: self.edges.clone(),
        }
    }

    pub fn from_file(file: &NetworkFile) -> Result<Self, NetworkError> {
        validate_network(file.dim, &file.vertices, &file.edges)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.canonical().to_file()).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NetworkError> {
        let file: NetworkFile = serde_json::from_str(text).map_err(|e| NetworkError::Parse(e.to_string()))?;
        Self::from_file(&file)
    }

    pub fn save(&self, path: &Path) -> Result<(), NetworkError> {
        fs::write(path, self.to_json()).map_err(|e| NetworkError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, NetworkError> {
        let text = fs::read_to_string(path).map_err(|e| NetworkError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn unit_triangle() -> EmbeddedNetwork {
        let h = 3f64.sqrt() / 2.0;
        validate_network(2, &[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, h]], &[[0, 1], [1, 2], [0, 2]]).unwrap()
    }

    fn dyadic2() -> EmbeddedNetwork {
        validate_network(1, &[vec![0.0], vec![0.5], vec![0.75]], &[[0, 1], [1, 2]]).unwrap()
    }

    #[test]
    fn triangle_is_valid() {
        let net = unit_triangle();
        assert_eq!(net.num_vertices(), 3);
        assert_eq!(net.num_edges(), 3);
        assert!((net.diameter() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn crossing_segments_are_rejected() {
        let err = validate_network(
            2,
            &[vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]],
            &[[0, 1], [2, 3]],
        )
        .unwrap_err();
        match err {
            NetworkError::IllegalEdgeIntersection { first, second, witness } => {
                assert_eq!((first, second), (0, 1));
                assert!((witness[0] - 0.5).abs() < 1e-12 && (witness[1] - 0.5).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dyadic_level_two_is_valid() {
        let net = dyadic2();
        assert_eq!(net.num_edges(), 2);
        assert!((net.total_length() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn axiom_violations() {
        let e = validate_network(1, &[vec![0.0], vec![0.0]], &[[0, 1]]).unwrap_err();
        assert_eq!(e, NetworkError::DuplicateVertex(0, 1));
        let e = validate_network(1, &[vec![0.0], vec![1.0]], &[[0, 2]]).unwrap_err();
        assert_eq!(e.kind(), "DanglingEdgeEndpoint");
        let e = validate_network(1, &[vec![0.0], vec![1.0]], &[[0, 0]]).unwrap_err();
        assert_eq!(e, NetworkError::ZeroLengthEdge(0));
        let e = validate_network(1, &[vec![0.0], vec![1.0]], &[[0, 1], [1, 0]]).unwrap_err();
        assert_eq!(e, NetworkError::DuplicateEdge(0, 1));
        let e = validate_network(1, &[vec![0.0], vec![1.0], vec![0.5]], &[[0, 1]]).unwrap_err();
        assert_eq!(e, NetworkError::VertexInsideEdge { vertex: 2, edge: 0 });
        let e = validate_network(1, &[vec![0.0], vec![1.0], vec![2.0], vec![3.0]], &[[0, 1], [2, 3]]).unwrap_err();
        assert_eq!(e, NetworkError::Disconnected(0, 2));
        let e = validate_network(1, &[vec![0.0]], &[]).unwrap_err();
        assert_eq!(e, NetworkError::EmptyNetwork);
        // Collinear overlap through distinct endpoints.
        let e = validate_network(
            2,
            &[vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 1.0], vec![1.0, -1.0]],
            &[[0, 1], [2, 3], [0, 2]],
        )
        .unwrap_err();
        assert_eq!(e.kind(), "IllegalEdgeIntersection");
    }

    #[test]
    fn canonicalize_vertex_addresses() {
        let net = dyadic2();
        // (edge 1, s=0) is vertex 1, which is the far end of edge 0.
        let p = net.canonicalize(NetworkPoint::new(1, 0.0)).unwrap();
        assert_eq!(p, NetworkPoint::new(0, 0.5));
        let q = net.canonicalize(NetworkPoint::new(0, 0.15)).unwrap();
        assert_eq!(q, NetworkPoint::new(0, 0.15));
        let r = net.canonicalize(NetworkPoint::new(0, 0.5)).unwrap();
        assert_eq!(r, NetworkPoint::new(0, 0.5));
        let e = net.canonicalize(NetworkPoint::new(0, 0.6)).unwrap_err();
        assert_eq!(e.kind(), "ParameterOutOfRange");
    }

    #[test]
    fn embedding() {
        let t1 = validate_network(1, &[vec![0.0], vec![0.5]], &[[0, 1]]).unwrap();
        assert_eq!(t1.embed(NetworkPoint::new(0, 0.0)).unwrap(), vec![0.0]);
        assert_eq!(t1.embed(NetworkPoint::new(0, 0.25)).unwrap(), vec![0.25]);
        let tri = unit_triangle();
        let mid = tri.embed(NetworkPoint::new(1, 0.5)).unwrap();
        let (a, b) = (tri.vertex(1), tri.vertex(2));
        assert!((mid[0] - (a[0] + b[0]) / 2.0).abs() < 1e-15);
        assert!((mid[1] - (a[1] + b[1]) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn locating_points() {
        let net = dyadic2();
        let v2 = net.locate_point(&[0.75], 1e-9).unwrap();
        assert_eq!(net.vertex_at(v2).unwrap(), Some(2));
        let p = net.locate_point(&[0.6], 1e-9).unwrap();
        assert_eq!(p.edge, 1);
        assert!((p.s - 0.1).abs() < 1e-12);
        let tri = unit_triangle();
        let c = [0.5, 3f64.sqrt() / 6.0];
        assert_eq!(tri.locate_point(&c, 1e-9).unwrap_err().kind(), "NotOnNetwork");
    }

    #[test]
    fn canonical_form_sorts() {
        let net = validate_network(1, &[vec![0.75], vec![0.0], vec![0.5]], &[[2, 0], [1, 2]]).unwrap();
        let c = net.canonical();
        assert_eq!(c.edges(), &[[0, 1], [1, 2]]);
        assert_eq!(c.vertex(2), &[0.75]);
        let back = EmbeddedNetwork::from_json(&net.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn malformed_file() {
        assert_eq!(EmbeddedNetwork::from_json("{ not json").unwrap_err().kind(), "ParseError");
    }
}
