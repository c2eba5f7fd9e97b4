//! Expanding network sequences: the dyadic interval networks, Sierpiński
//! prefractals, and loaded custom sequences, plus checks that a sequence is
//! nested and stabilizes locally around every vertex.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{collinear_interval, dist, lerp, point_segment_distance, project_to_segment, uncovered_intervals};
use crate::network::{validate_network, EmbeddedNetwork, NetworkError};

pub const MANIFEST_NAME: &str = "sequence.json";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneratorError {
    #[error("depth {0} is too small (need at least 1)")]
    DepthTooSmall(usize),
    #[error("corner points are collinear")]
    CollinearCorners,
    #[error("a sequence needs at least {needed} levels, got {found}")]
    TooFewLevels { needed: usize, found: usize },
    #[error("edge {edge} of level {level} is not contained in level {next} (gap near {witness:?})")]
    NestingViolation { level: usize, next: usize, edge: usize, witness: Vec<f64> },
    #[error("vertex {vertex:?} of level {level} is missing from level {next}")]
    VertexNotNested { level: usize, next: usize, vertex: Vec<f64> },
    #[error("no stabilization radius for vertex {vertex:?}: level {level} adds network at {witness:?}")]
    StabilizationViolation { vertex: Vec<f64>, level: usize, witness: Vec<f64> },
    #[error("invalid sequence file: {0}")]
    Parse(String),
    #[error("invalid network in sequence: {0}")]
    Validation(NetworkError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl GeneratorError {
    pub fn kind(&self) -> &'static str {
        match self {
            GeneratorError::DepthTooSmall(_) => "DepthTooSmall",
            GeneratorError::CollinearCorners => "CollinearCorners",
            GeneratorError::TooFewLevels { .. } => "TooFewLevels",
            GeneratorError::NestingViolation { .. } | GeneratorError::VertexNotNested { .. } => "NestingViolation",
            GeneratorError::StabilizationViolation { .. } => "StabilizationViolation",
            GeneratorError::Parse(_) => "ParseError",
            GeneratorError::Validation(_) => "ValidationError",
            GeneratorError::Io(_) => "IoError",
        }
    }

    /// The underlying network error name for `ValidationError`.
    pub fn cause(&self) -> Option<&'static str> {
        match self {
            GeneratorError::Validation(e) => Some(e.kind()),
            _ => None,
        }
    }
}

impl From<NetworkError> for GeneratorError {
    fn from(e: NetworkError) -> Self {
        match e {
            NetworkError::Parse(m) => GeneratorError::Parse(m),
            NetworkError::Io(m) => GeneratorError::Io(m),
            other => GeneratorError::Validation(other),
        }
    }
}

pub const DEFAULT_CORNERS: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.5, 0.866_025_403_784_438_6]];

/// Interval network with vertices `0, 1/2, 3/4, ..., 1 - 2^-n`.
pub fn dyadic_network(n: usize) -> Result<EmbeddedNetwork, GeneratorError> {
    if n < 1 {
        return Err(GeneratorError::DepthTooSmall(n));
    }
    let vertices: Vec<Vec<f64>> = (0..=n).map(|i| vec![1.0 - 0.5f64.powi(i as i32)]).collect();
    let edges: Vec<[usize; 2]> = (0..n).map(|i| [i, i + 1]).collect();
    Ok(validate_network(1, &vertices, &edges)?)
}

fn check_corners(corners: &[[f64; 2]; 3]) -> Result<(), GeneratorError> {
    let [a, b, c] = corners;
    let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let scale = dist(a, b).max(dist(a, c)).max(dist(b, c));
    if !cross.is_finite() || cross.abs() <= 1e-12 * scale * scale {
        return Err(GeneratorError::CollinearCorners);
    }
    Ok(())
}

/// Level-`n` Sierpiński prefractal: the images of the corner triangle's
/// sides under all `n`-fold compositions of the half-contractions towards
/// the corners.
pub fn sierpinski_prefractal(n: usize, corners: &[[f64; 2]; 3]) -> Result<EmbeddedNetwork, GeneratorError> {
    check_corners(corners)?;
    // Barycentric coordinates scaled by 2^n are integers; a triangle is
    // stored as its three corners in those coordinates.
    let scale = 1u64 << n;
    type Bary = [u64; 3];
    let mut triangles: Vec<[Bary; 3]> = vec![[[scale, 0, 0], [0, scale, 0], [0, 0, scale]]];
    for _ in 0..n {
        let mut next = Vec::with_capacity(triangles.len() * 3);
        for [p, q, r] in triangles {
            let mid = |x: Bary, y: Bary| [(x[0] + y[0]) / 2, (x[1] + y[1]) / 2, (x[2] + y[2]) / 2];
            let (pq, qr, pr) = (mid(p, q), mid(q, r), mid(p, r));
            next.push([p, pq, pr]);
            next.push([pq, q, qr]);
            next.push([pr, qr, r]);
        }
        triangles = next;
    }
    let mut index: HashMap<Bary, usize> = HashMap::new();
    let mut bary: Vec<Bary> = Vec::new();
    let mut id = |x: Bary| {
        *index.entry(x).or_insert_with(|| {
            bary.push(x);
            bary.len() - 1
        })
    };
    let mut edges = Vec::with_capacity(triangles.len() * 3);
    for [p, q, r] in triangles {
        let (a, b, c) = (id(p), id(q), id(r));
        edges.extend([[a, b], [b, c], [a, c]]);
    }
    let inv = 1.0 / scale as f64;
    let vertices: Vec<Vec<f64>> = bary
        .iter()
        .map(|w| {
            (0..2)
                .map(|k| (w[0] as f64 * corners[0][k] + w[1] as f64 * corners[1][k] + w[2] as f64 * corners[2][k]) * inv)
                .collect()
        })
        .collect();
    Ok(validate_network(2, &vertices, &edges)?.canonical())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceKind {
    Dyadic,
    Sierpinski,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceParams {
    pub depth: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corners: Option<[[f64; 2]; 3]>,
}

/// Levels `first_level ..= first_level + levels.len() - 1` of an expanding sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandingSequence {
    pub kind: SequenceKind,
    pub params: SequenceParams,
    pub first_level: usize,
    pub levels: Vec<EmbeddedNetwork>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    kind: SequenceKind,
    params: SequenceParams,
    first_level: usize,
    levels: Vec<String>,
}

impl ExpandingSequence {
    /// Dyadic levels `1..=depth`.
    pub fn dyadic(depth: usize) -> Result<Self, GeneratorError> {
        let levels = (1..=depth).map(dyadic_network).collect::<Result<Vec<_>, _>>()?;
        if levels.is_empty() {
            return Err(GeneratorError::DepthTooSmall(depth));
        }
        Ok(ExpandingSequence { kind: SequenceKind::Dyadic, params: SequenceParams { depth, corners: None }, first_level: 1, levels })
    }

    /// Sierpiński levels `0..=depth`.
    pub fn sierpinski(depth: usize, corners: [[f64; 2]; 3]) -> Result<Self, GeneratorError> {
        let levels = (0..=depth).map(|n| sierpinski_prefractal(n, &corners)).collect::<Result<Vec<_>, _>>()?;
        Ok(ExpandingSequence {
            kind: SequenceKind::Sierpinski,
            params: SequenceParams { depth, corners: Some(corners) },
            first_level: 0,
            levels,
        })
    }

    pub fn custom(first_level: usize, levels: Vec<EmbeddedNetwork>) -> Result<Self, GeneratorError> {
        if levels.is_empty() {
            return Err(GeneratorError::TooFewLevels { needed: 1, found: 0 });
        }
        let depth = first_level + levels.len() - 1;
        Ok(ExpandingSequence { kind: SequenceKind::Custom, params: SequenceParams { depth, corners: None }, first_level, levels })
    }

    pub fn last_level(&self) -> usize {
        self.first_level + self.levels.len() - 1
    }

    pub fn level_indices(&self) -> std::ops::RangeInclusive<usize> {
        self.first_level..=self.last_level()
    }

    pub fn level(&self, n: usize) -> Option<&EmbeddedNetwork> {
        n.checked_sub(self.first_level).and_then(|i| self.levels.get(i))
    }

    pub fn finest(&self) -> &EmbeddedNetwork {
        self.levels.last().expect("sequences are never empty")
    }

    /// Length unit for per-level stabilization radii: the shortest corner
    /// side for Sierpiński, the limit interval length for dyadic, and the
    /// finest level's diameter otherwise.
    pub fn base_scale(&self) -> f64 {
        match (self.kind, &self.params.corners) {
            (SequenceKind::Sierpinski, Some([a, b, c])) => dist(a, b).min(dist(b, c)).min(dist(a, c)),
            (SequenceKind::Dyadic, _) => 1.0,
            _ => self.finest().diameter(),
        }
    }

    /// Writes `level_<n>.json` per level and a `sequence.json` manifest into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), GeneratorError> {
        let io = |e: std::io::Error| GeneratorError::Io(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        let mut names = Vec::new();
        for (n, net) in self.level_indices().zip(&self.levels) {
            let name = format!("level_{n}.json");
            net.save(&dir.join(&name))?;
            names.push(name);
        }
        let manifest = Manifest { kind: self.kind, params: self.params.clone(), first_level: self.first_level, levels: names };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(dir.join(MANIFEST_NAME), text).map_err(io)
    }

    /// Loads a sequence from a directory holding `sequence.json`, or from the
    /// manifest file itself. Level paths are relative to the manifest.
    pub fn load(path: &Path) -> Result<Self, GeneratorError> {
        let manifest_path: PathBuf = if path.is_dir() { path.join(MANIFEST_NAME) } else { path.to_path_buf() };
        let text = fs::read_to_string(&manifest_path).map_err(|e| GeneratorError::Io(format!("{}: {e}", manifest_path.display())))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| GeneratorError::Parse(e.to_string()))?;
        if manifest.levels.is_empty() {
            return Err(GeneratorError::TooFewLevels { needed: 1, found: 0 });
        }
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let levels = manifest
            .levels
            .iter()
            .map(|name| EmbeddedNetwork::load(&base.join(name)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ExpandingSequence { kind: manifest.kind, params: manifest.params, first_level: manifest.first_level, levels })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilizationMode {
    /// One radius per vertex, valid at every finer level.
    FixedR,
    /// Radius `2^-(l+1) * scale` at level `l`.
    ShrinkingR,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexStatus {
    Certified,
    /// Too few finer levels were generated to decide.
    Undetermined,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NestingCheck {
    pub level: usize,
    pub next: usize,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VertexCertificate {
    pub point: Vec<f64>,
    /// Level at which the vertex first appears.
    pub first_level: usize,
    pub status: VertexStatus,
    /// Level `m` whose neighbourhood the vertex keeps from then on.
    pub anchor_level: Option<usize>,
    /// Largest radius that works for all generated levels from the anchor on;
    /// `None` when nothing is ever added near the vertex.
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<(usize, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionReport {
    pub mode: StabilizationMode,
    pub first_level: usize,
    pub last_level: usize,
    pub nesting: Vec<NestingCheck>,
    pub vertices: Vec<VertexCertificate>,
}

impl ExpansionReport {
    pub fn nested(&self) -> bool {
        self.nesting.iter().all(|c| c.ok)
    }

    pub fn certified(&self) -> bool {
        self.nested() && self.vertices.iter().all(|v| v.status != VertexStatus::Violated)
    }

    pub fn count(&self, status: VertexStatus) -> usize {
        self.vertices.iter().filter(|v| v.status == status).count()
    }
}

fn bbox_overlap(a0: &[f64], a1: &[f64], b0: &[f64], b1: &[f64], tol: f64) -> bool {
    (0..a0.len()).all(|k| a0[k].min(a1[k]) <= b0[k].max(b1[k]) + tol && b0[k].min(b1[k]) <= a0[k].max(a1[k]) + tol)
}

/// Parts of `fine`'s edges not covered by `coarse`, as ambient segments.
fn uncovered_pieces(coarse: &EmbeddedNetwork, fine: &EmbeddedNetwork, tol: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
    (0..fine.num_edges())
        .into_par_iter()
        .flat_map_iter(|e| {
            let [a, b] = fine.edge(e);
            let (pa, pb) = (fine.vertex(a), fine.vertex(b));
            let mut covers: Vec<(f64, f64)> = coarse
                .edges()
                .iter()
                .filter(|&&[c, d]| bbox_overlap(pa, pb, coarse.vertex(c), coarse.vertex(d), tol))
                .filter_map(|&[c, d]| collinear_interval(pa, pb, coarse.vertex(c), coarse.vertex(d), tol))
                .collect();
            let gap_tol = tol / fine.edge_length(e);
            uncovered_intervals(&mut covers, gap_tol)
                .into_iter()
                .map(|(t0, t1)| (lerp(pa, pb, t0), lerp(pa, pb, t1)))
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Distance from `v` to the closure of the union of `pieces`, with the witness point.
fn nearest_piece(v: &[f64], pieces: &[(Vec<f64>, Vec<f64>)]) -> Option<(f64, Vec<f64>)> {
    pieces
        .iter()
        .map(|(a, b)| {
            let (t, d) = project_to_segment(v, a, b);
            (d, lerp(a, b, t))
        })
        .min_by(|x, y| x.0.total_cmp(&y.0))
}

fn check_nesting(coarse: &EmbeddedNetwork, fine: &EmbeddedNetwork, tol: f64) -> Option<Vec<f64>> {
    for v in coarse.vertices() {
        if !fine.vertices().any(|w| dist(v, w) <= tol) {
            return Some(v.to_vec());
        }
    }
    uncovered_pieces(fine, coarse, tol).into_iter().next().map(|(a, b)| lerp(&a, &b, 0.5))
}

/// Nesting and local stabilization report for a sequence. Never fails on
/// a violation; use [`verify_expanding`] for a pass/fail answer.
pub fn expansion_report(seq: &ExpandingSequence, mode: StabilizationMode) -> Result<ExpansionReport, GeneratorError> {
    if seq.levels.len() < 2 {
        return Err(GeneratorError::TooFewLevels { needed: 2, found: seq.levels.len() });
    }
    let tol = seq.levels.iter().map(|n| n.eps()).fold(0.0, f64::max);
    let levels: Vec<usize> = seq.level_indices().collect();
    let nesting: Vec<NestingCheck> = seq
        .levels
        .windows(2)
        .zip(&levels)
        .map(|(w, &n)| {
            let witness = check_nesting(&w[0], &w[1], tol);
            NestingCheck { level: n, next: n + 1, ok: witness.is_none(), witness }
        })
        .collect();

    // Each vertex is tracked from the first level where it appears.
    let mut tracked: Vec<(Vec<f64>, usize)> = Vec::new();
    for (i, net) in seq.levels.iter().enumerate() {
        for v in net.vertices() {
            let seen = i > 0 && seq.levels[i - 1].vertices().any(|w| dist(v, w) <= tol);
            if !seen {
                tracked.push((v.to_vec(), levels[i]));
            }
        }
    }

    // pieces[(m, l)] = closure of level l minus level m, for m < l.
    let nl = seq.levels.len();
    let needed = |li: usize| match mode {
        StabilizationMode::FixedR => li + 2 >= nl,
        StabilizationMode::ShrinkingR => true,
    };
    let mut pieces: HashMap<(usize, usize), Vec<(Vec<f64>, Vec<f64>)>> = HashMap::new();
    for mi in 0..nl {
        for li in mi + 1..nl {
            if needed(li) {
                pieces.insert((mi, li), uncovered_pieces(&seq.levels[mi], &seq.levels[li], tol));
            }
        }
    }

    let scale = seq.base_scale();
    let rel_same = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (a.abs().max(b.abs()) + tol);
    let vertices = tracked
        .into_par_iter()
        .map(|(point, first)| {
            let fi = first - seq.first_level;
            let mut cert = VertexCertificate { point, first_level: first, status: VertexStatus::Undetermined, anchor_level: None, radius: None, witness: None };
            match mode {
                StabilizationMode::FixedR => {
                    // A radius is certified once the last refinement left it unchanged;
                    // a radius that shrank at the last refinement counts against the vertex.
                    let mut shrinking = None;
                    for mi in fi..nl.saturating_sub(2) {
                        let near = |li: usize| nearest_piece(&cert.point, &pieces[&(mi, li)]);
                        let (prev, last) = (near(nl - 2), near(nl - 1));
                        match (prev, last) {
                            (_, None) => {
                                cert.status = VertexStatus::Certified;
                                cert.anchor_level = Some(levels[mi]);
                                break;
                            }
                            (Some((rp, _)), Some((rl, _))) if rl > tol && rel_same(rp, rl) => {
                                cert.status = VertexStatus::Certified;
                                cert.anchor_level = Some(levels[mi]);
                                cert.radius = Some(rl);
                                break;
                            }
                            (_, Some((rl, w))) if rl > tol && shrinking.is_none() => {
                                shrinking = Some((rl, w));
                            }
                            _ => {}
                        }
                    }
                    if cert.status != VertexStatus::Certified {
                        if let Some((_, w)) = shrinking {
                            cert.status = VertexStatus::Violated;
                            cert.witness = Some((levels[nl - 1], w));
                        }
                    }
                }
                StabilizationMode::ShrinkingR => {
                    // First anchor level m >= first whose neighbourhood is kept
                    // within the per-level radius at every finer level.
                    let mut first_failure = None;
                    for mi in fi..nl {
                        let mut radius: Option<f64> = None;
                        let mut failure = None;
                        for li in mi + 1..nl {
                            if let Some((d, w)) = nearest_piece(&cert.point, &pieces[&(mi, li)]) {
                                let r_l = 0.5f64.powi(levels[li] as i32 + 1) * scale;
                                if d + tol < r_l {
                                    failure = Some((levels[li], w));
                                    break;
                                }
                                radius = Some(radius.map_or(d, |r: f64| r.min(d)));
                            }
                        }
                        match failure {
                            None => {
                                cert.status = if mi + 1 < nl { VertexStatus::Certified } else { VertexStatus::Undetermined };
                                cert.anchor_level = Some(levels[mi]);
                                cert.radius = radius;
                                break;
                            }
                            Some(f) => {
                                first_failure.get_or_insert(f);
                            }
                        }
                    }
                    if cert.anchor_level.is_none() {
                        cert.status = VertexStatus::Violated;
                        cert.witness = first_failure;
                    }
                }
            }
            cert
        })
        .collect();

    Ok(ExpansionReport { mode, first_level: seq.first_level, last_level: seq.last_level(), nesting, vertices })
}

/// Certifies nesting and local stabilization, failing on the first violation.
pub fn verify_expanding(seq: &ExpandingSequence, mode: StabilizationMode) -> Result<ExpansionReport, GeneratorError> {
    let report = expansion_report(seq, mode)?;
    if let Some(c) = report.nesting.iter().find(|c| !c.ok) {
        let witness = c.witness.clone().unwrap_or_default();
        let coarse = seq.level(c.level).expect("level exists");
        let is_vertex = coarse.vertices().any(|v| v == witness.as_slice());
        return Err(if is_vertex {
            GeneratorError::VertexNotNested { level: c.level, next: c.next, vertex: witness }
        } else {
            let edge = (0..coarse.num_edges())
                .min_by(|&x, &y| {
                    let d = |e: usize| {
                        let [a, b] = coarse.edge(e);
                        point_segment_distance(&witness, coarse.vertex(a), coarse.vertex(b))
                    };
                    d(x).total_cmp(&d(y))
                })
                .unwrap_or(0);
            GeneratorError::NestingViolation { level: c.level, next: c.next, edge, witness }
        });
    }
    if let Some(v) = report.vertices.iter().find(|v| v.status == VertexStatus::Violated) {
        let (level, witness) = v.witness.clone().unwrap_or((report.last_level, v.point.clone()));
        return Err(GeneratorError::StabilizationViolation { vertex: v.point.clone(), level, witness });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_levels() {
        let t2 = dyadic_network(2).unwrap();
        assert_eq!(t2.vertices().map(|v| v[0]).collect::<Vec<_>>(), vec![0.0, 0.5, 0.75]);
        assert_eq!(t2.edges(), &[[0, 1], [1, 2]]);
        let t1 = dyadic_network(1).unwrap();
        assert_eq!(t1.num_edges(), 1);
        assert_eq!(t1.edge_length(0), 0.5);
        for n in 1..=12 {
            let t = dyadic_network(n).unwrap();
            assert_eq!(t.num_vertices(), n + 1);
            assert_eq!(t.total_length(), 1.0 - 0.5f64.powi(n as i32));
        }
        assert_eq!(dyadic_network(0).unwrap_err(), GeneratorError::DepthTooSmall(0));
    }

    #[test]
    fn sierpinski_counts() {
        for n in 0..=5 {
            let s = sierpinski_prefractal(n, &DEFAULT_CORNERS).unwrap();
            assert_eq!(s.num_edges(), 3usize.pow(n as u32 + 1));
            assert_eq!(s.num_vertices(), (3usize.pow(n as u32 + 1) + 3) / 2);
            let expected = 3.0 * 1.5f64.powi(n as i32);
            assert!((s.total_length() - expected).abs() < 1e-12 * expected);
        }
        let s1 = sierpinski_prefractal(1, &DEFAULT_CORNERS).unwrap();
        assert!(s1.edge_lengths().iter().all(|&l| (l - 0.5).abs() < 1e-15));
    }

    #[test]
    fn collinear_corners_are_rejected() {
        let err = sierpinski_prefractal(1, &[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).unwrap_err();
        assert_eq!(err, GeneratorError::CollinearCorners);
    }

    #[test]
    fn dyadic_fixed_radius() {
        let seq = ExpandingSequence::dyadic(5).unwrap();
        let report = verify_expanding(&seq, StabilizationMode::FixedR).unwrap();
        assert!(report.nested());
        for v in &report.vertices {
            let x = v.point[0];
            if let Some(i) = (0..=2).find(|&i| (x - (1.0 - 0.5f64.powi(i))).abs() < 1e-15) {
                assert_eq!(v.status, VertexStatus::Certified);
                let r = v.radius.unwrap();
                assert!((r - 0.5f64.powi(i + 1)).abs() < 1e-12);
                assert!(r >= 0.5f64.powi(i + 2));
            } else {
                assert_eq!(v.status, VertexStatus::Undetermined);
            }
        }
    }

    #[test]
    fn sierpinski_stabilization() {
        let seq = ExpandingSequence::sierpinski(4, DEFAULT_CORNERS).unwrap();
        let err = verify_expanding(&seq, StabilizationMode::FixedR).unwrap_err();
        assert_eq!(err.kind(), "StabilizationViolation");
        let report = verify_expanding(&seq, StabilizationMode::ShrinkingR).unwrap();
        assert_eq!(report.count(VertexStatus::Violated), 0);
        assert_eq!(report.vertices.len(), seq.finest().num_vertices());
    }

    #[test]
    fn broken_nesting() {
        let a = dyadic_network(2).unwrap();
        let b = validate_network(1, &[vec![0.0], vec![0.25]], &[[0, 1]]).unwrap();
        let seq = ExpandingSequence::custom(0, vec![a, b]).unwrap();
        let err = verify_expanding(&seq, StabilizationMode::FixedR).unwrap_err();
        assert_eq!(err.kind(), "NestingViolation");
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let seq = ExpandingSequence::dyadic(3).unwrap();
        seq.save(dir.path()).unwrap();
        assert!(dir.path().join("level_3.json").exists());
        let back = ExpandingSequence::load(dir.path()).unwrap();
        assert_eq!(back, seq);
        let back = ExpandingSequence::load(&dir.path().join(MANIFEST_NAME)).unwrap();
        assert_eq!(back.level(2), seq.level(2));

        fs::write(dir.path().join(MANIFEST_NAME), "{ not json").unwrap();
        assert_eq!(ExpandingSequence::load(dir.path()).unwrap_err().kind(), "ParseError");

        let crossing = r#"{"dim": 2, "vertices": [[0,0],[1,1],[0,1],[1,0]], "edges": [[0,1],[2,3]]}"#;
        fs::write(dir.path().join("level_1.json"), crossing).unwrap();
        let manifest = r#"{"kind": "custom", "params": {"depth": 1}, "first_level": 1, "levels": ["level_1.json"]}"#;
        fs::write(dir.path().join(MANIFEST_NAME), manifest).unwrap();
        let err = ExpandingSequence::load(dir.path()).unwrap_err();
        assert_eq!(err.kind(), "ValidationError");
        assert_eq!(err.cause(), Some("IllegalEdgeIntersection"));
    }
}
