//! Hausdorff distance between networks seen as compact subsets of R^d.
//!
//! The directed distance is a sup of a 1-Lipschitz function along the edges
//! of one network, so sampling at arclength spacing `h` (endpoints included)
//! underestimates it by at most `h / 2`.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{lerp, point_segment_distance};
use crate::network::EmbeddedNetwork;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HausdorffError {
    #[error("sampling step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("networks live in different dimensions ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("empty network sequence")]
    EmptySequence,
}

impl HausdorffError {
    pub fn kind(&self) -> &'static str {
        match self {
            HausdorffError::InvalidStep(_) => "InvalidStep",
            HausdorffError::DimensionMismatch(..) => "DimensionMismatch",
            HausdorffError::EmptySequence => "EmptySequence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HausdorffReport {
    pub directed_ab: f64,
    pub directed_ba: f64,
    pub value: f64,
    pub certified_error: f64,
}

/// Euclidean distance from `q` to the nearest point of the network.
pub fn dist_to_network(net: &EmbeddedNetwork, q: &[f64]) -> f64 {
    net.edges()
        .iter()
        .map(|&[a, b]| point_segment_distance(q, net.vertex(a), net.vertex(b)))
        .fold(f64::INFINITY, f64::min)
}

/// Bounding-box pruned distance evaluator for repeated queries against `b`.
struct SegmentIndex<'a> {
    net: &'a EmbeddedNetwork,
    boxes: Vec<(Vec<f64>, Vec<f64>)>,
}

impl<'a> SegmentIndex<'a> {
    fn new(net: &'a EmbeddedNetwork) -> Self {
        let boxes = net
            .edges()
            .iter()
            .map(|&[a, b]| {
                let (pa, pb) = (net.vertex(a), net.vertex(b));
                (pa.iter().zip(pb).map(|(x, y)| x.min(*y)).collect(), pa.iter().zip(pb).map(|(x, y)| x.max(*y)).collect())
            })
            .collect();
        SegmentIndex { net, boxes }
    }

    fn box_dist2(q: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
        q.iter()
            .zip(lo.iter().zip(hi))
            .map(|(x, (l, h))| {
                let d = if x < l { l - x } else if x > h { x - h } else { 0.0 };
                d * d
            })
            .sum()
    }

    /// Exact distance; `hint` is the edge that was closest for the previous query.
    fn distance(&self, q: &[f64], hint: &mut usize) -> f64 {
        let net = self.net;
        let seg = |e: usize| {
            let [a, b] = net.edge(e);
            point_segment_distance(q, net.vertex(a), net.vertex(b))
        };
        let mut best = seg(*hint);
        for (e, (lo, hi)) in self.boxes.iter().enumerate() {
            if Self::box_dist2(q, lo, hi) >= best * best {
                continue;
            }
            let d = seg(e);
            if d < best {
                best = d;
                *hint = e;
            }
        }
        best
    }
}

/// Sup over `a` of the distance to `b`, sampled at spacing at most `h`.
/// Returns `(value, certified_error)`.
pub fn directed_hausdorff(a: &EmbeddedNetwork, b: &EmbeddedNetwork, h: f64) -> Result<(f64, f64), HausdorffError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(HausdorffError::InvalidStep(h));
    }
    if a.dim() != b.dim() {
        return Err(HausdorffError::DimensionMismatch(a.dim(), b.dim()));
    }
    let index = SegmentIndex::new(b);
    let per_edge: Vec<f64> = (0..a.num_edges())
        .into_par_iter()
        .map(|e| {
            let [u, v] = a.edge(e);
            let (pu, pv) = (a.vertex(u), a.vertex(v));
            let pieces = (a.edge_length(e) / h).ceil().max(1.0) as usize;
            let mut hint = 0;
            let mut sup = 0.0_f64;
            for k in 0..=pieces {
                let q = lerp(pu, pv, k as f64 / pieces as f64);
                sup = sup.max(index.distance(&q, &mut hint));
            }
            sup
        })
        .collect();
    Ok((per_edge.into_iter().fold(0.0, f64::max), h / 2.0))
}

pub fn hausdorff_distance(a: &EmbeddedNetwork, b: &EmbeddedNetwork, h: f64) -> Result<HausdorffReport, HausdorffError> {
    let (directed_ab, certified_error) = directed_hausdorff(a, b, h)?;
    let (directed_ba, _) = directed_hausdorff(b, a, h)?;
    Ok(HausdorffReport { directed_ab, directed_ba, value: directed_ab.max(directed_ba), certified_error })
}

/// Default sampling step: a thousandth of the diameter.
pub fn default_step(net: &EmbeddedNetwork) -> f64 {
    1e-3 * net.diameter()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub value: f64,
    pub certified_error: f64,
    /// Running minimum of `value + certified_error` over coarser levels.
    pub upper: f64,
    /// Set when the value grew by more than twice the certificate.
    pub flagged: bool,
    /// `log2(d_{n-1} / d_n)` against the previous row, when both are positive.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub finest_level: usize,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn monotone(&self) -> bool {
        self.rows.iter().all(|r| !r.flagged)
    }

    /// CSV with header `n,d_H,certificate`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,d_H,certificate\n");
        for r in &self.rows {
            writeln!(out, "{},{},{}", r.level, r.value, r.certified_error).unwrap();
        }
        out
    }
}

/// `d_H(level_n, level_N)` for every level of `seq`, where `N` is the last.
/// `first_level` is the index attached to `seq[0]`.
pub fn check_hausdorff_convergence(seq: &[EmbeddedNetwork], first_level: usize, h: f64) -> Result<ConvergenceTable, HausdorffError> {
    let finest = seq.last().ok_or(HausdorffError::EmptySequence)?;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(seq.len());
    let mut upper = f64::INFINITY;
    for (i, net) in seq.iter().enumerate() {
        let rep = hausdorff_distance(net, finest, h)?;
        let prev = rows.last();
        let flagged = prev.is_some_and(|p| rep.value > p.value + 2.0 * rep.certified_error);
        let rate = prev.and_then(|p| (p.value > 0.0 && rep.value > 0.0).then(|| (p.value / rep.value).log2()));
        upper = upper.min(rep.value + rep.certified_error);
        rows.push(ConvergenceRow { level: first_level + i, value: rep.value, certified_error: rep.certified_error, upper, flagged, rate });
    }
    Ok(ConvergenceTable { finest_level: first_level + seq.len() - 1, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::validate_network;

    fn interval(xs: &[f64]) -> EmbeddedNetwork {
        let v: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let e: Vec<[usize; 2]> = (0..xs.len() - 1).map(|i| [i, i + 1]).collect();
        validate_network(1, &v, &e).unwrap()
    }

    fn triangle() -> EmbeddedNetwork {
        let h = 3f64.sqrt() / 2.0;
        validate_network(2, &[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, h]], &[[0, 1], [1, 2], [0, 2]]).unwrap()
    }

    #[test]
    fn point_distances() {
        let t = triangle();
        assert_eq!(dist_to_network(&t, &[0.0, 0.0]), 0.0);
        assert!((dist_to_network(&t, &[0.5, -0.3]) - 0.3).abs() < 1e-15);
        assert!((dist_to_network(&interval(&[0.0, 0.5]), &[1.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn directed_values() {
        let unit = interval(&[0.0, 1.0]);
        let t3 = interval(&[0.0, 0.5, 0.75, 0.875]);
        let (v, c) = directed_hausdorff(&unit, &t3, 1e-3).unwrap();
        assert!((v - 0.125).abs() <= c);
        assert_eq!(directed_hausdorff(&t3, &unit, 1e-3).unwrap().0, 0.0);
        assert_eq!(directed_hausdorff(&unit, &unit, 0.1).unwrap(), (0.0, 0.05));
        assert_eq!(directed_hausdorff(&unit, &unit, 0.0).unwrap_err().kind(), "InvalidStep");
        assert_eq!(directed_hausdorff(&unit, &triangle(), 0.1).unwrap_err().kind(), "DimensionMismatch");
    }

    #[test]
    fn symmetric_report() {
        let a = interval(&[0.0, 1.0]);
        let b = interval(&[0.0, 0.5, 0.75]);
        let ab = hausdorff_distance(&a, &b, 1e-3).unwrap();
        let ba = hausdorff_distance(&b, &a, 1e-3).unwrap();
        assert_eq!(ab.value, ba.value);
        assert!((ab.value - 0.25).abs() < 1e-15);
    }

    #[test]
    fn convergence_table() {
        let levels: Vec<EmbeddedNetwork> = (1..=6)
            .map(|n| interval(&(0..=n).map(|i| 1.0 - 0.5f64.powi(i)).collect::<Vec<_>>()))
            .collect();
        let table = check_hausdorff_convergence(&levels, 1, 1e-3).unwrap();
        assert!(table.monotone());
        for r in &table.rows {
            let exact = 0.5f64.powi(r.level as i32) - 0.5f64.powi(6);
            assert!((r.value - exact).abs() <= r.certified_error);
        }
        assert_eq!(table.rows.last().unwrap().value, 0.0);
        assert!(table.to_csv().starts_with("n,d_H,certificate\n1,"));
        let single = check_hausdorff_convergence(&levels[..1], 1, 1e-3).unwrap();
        assert_eq!(single.rows.len(), 1);
        assert_eq!(single.rows[0].value, 0.0);
        assert_eq!(check_hausdorff_convergence(&[], 0, 1e-3).unwrap_err(), HausdorffError::EmptySequence);
    }
}
