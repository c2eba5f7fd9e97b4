//! Declarative Lipschitz scalar fields used as initial data `g` and
//! potentials `V`, and their binding to a concrete network level.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::dist;
use crate::metric::{DistanceRow, MetricOracle};
use crate::network::{NetworkError, NetworkPoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("anchor {anchor:?} is {distance} away from this level")]
    AnchorNotOnLevel { anchor: Vec<f64>, distance: f64 },
    #[error("axis {axis} is out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("point has {found} coordinates, the network has dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{0} needs at least one term")]
    EmptyCombination(&'static str),
    #[error("non-finite parameter in field spec")]
    NonFinite,
    #[error("invalid field spec: {0}")]
    Parse(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

impl FieldError {
    pub fn kind(&self) -> &'static str {
        match self {
            FieldError::AnchorNotOnLevel { .. } => "AnchorNotOnLevel",
            FieldError::AxisOutOfRange { .. } => "AxisOutOfRange",
            FieldError::DimensionMismatch { .. } => "DimensionMismatch",
            FieldError::EmptyCombination(_) => "EmptyCombination",
            FieldError::NonFinite => "NonFinite",
            FieldError::Parse(_) => "ParseError",
            FieldError::Network(e) => e.kind(),
        }
    }
}

fn one() -> f64 {
    1.0
}

/// JSON form: `{"kind": "euclid_dist_to", "point": [0, 0], "scale": 1}`,
/// with `sum`/`min`/`max` nesting through `terms`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarFieldSpec {
    Constant {
        value: f64,
    },
    Coordinate {
        axis: usize,
        #[serde(default = "one")]
        scale: f64,
    },
    EuclidDistTo {
        point: Vec<f64>,
        #[serde(default = "one")]
        scale: f64,
    },
    /// Intrinsic distance to the network point closest to `anchor`
    /// (ambient coordinates), resolved separately on every level.
    IntrinsicDistTo {
        anchor: Vec<f64>,
        #[serde(default = "one")]
        scale: f64,
    },
    Sum {
        terms: Vec<ScalarFieldSpec>,
    },
    Min {
        terms: Vec<ScalarFieldSpec>,
    },
    Max {
        terms: Vec<ScalarFieldSpec>,
    },
}

impl ScalarFieldSpec {
    pub fn constant(value: f64) -> Self {
        ScalarFieldSpec::Constant { value }
    }

    pub fn coordinate(axis: usize) -> Self {
        ScalarFieldSpec::Coordinate { axis, scale: 1.0 }
    }

    pub fn euclid_dist_to(point: Vec<f64>, scale: f64) -> Self {
        ScalarFieldSpec::EuclidDistTo { point, scale }
    }

    pub fn intrinsic_dist_to(anchor: Vec<f64>, scale: f64) -> Self {
        ScalarFieldSpec::IntrinsicDistTo { anchor, scale }
    }

    pub fn sum(terms: Vec<ScalarFieldSpec>) -> Self {
        ScalarFieldSpec::Sum { terms }
    }

    pub fn min(terms: Vec<ScalarFieldSpec>) -> Self {
        ScalarFieldSpec::Min { terms }
    }

    pub fn max(terms: Vec<ScalarFieldSpec>) -> Self {
        ScalarFieldSpec::Max { terms }
    }

    pub fn from_json(text: &str) -> Result<Self, FieldError> {
        serde_json::from_str(text).map_err(|e| FieldError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("field spec serializes")
    }

    /// Lipschitz bound with respect to the intrinsic metric, read off the
    /// structure (intrinsic distance dominates the Euclidean one).
    pub fn structural_lipschitz(&self) -> f64 {
        match self {
            ScalarFieldSpec::Constant { .. } => 0.0,
            ScalarFieldSpec::Coordinate { scale, .. }
            | ScalarFieldSpec::EuclidDistTo { scale, .. }
            | ScalarFieldSpec::IntrinsicDistTo { scale, .. } => scale.abs(),
            ScalarFieldSpec::Sum { terms } => terms.iter().map(Self::structural_lipschitz).sum(),
            ScalarFieldSpec::Min { terms } | ScalarFieldSpec::Max { terms } => {
                terms.iter().map(Self::structural_lipschitz).fold(0.0, f64::max)
            }
        }
    }

    /// The constant value when the spec is structurally constant.
    pub fn constant_value(&self) -> Option<f64> {
        match self {
            ScalarFieldSpec::Constant { value } => Some(*value),
            ScalarFieldSpec::Coordinate { scale, .. }
            | ScalarFieldSpec::EuclidDistTo { scale, .. }
            | ScalarFieldSpec::IntrinsicDistTo { scale, .. } => (*scale == 0.0).then_some(0.0),
            ScalarFieldSpec::Sum { terms } => terms.iter().map(Self::constant_value).sum(),
            ScalarFieldSpec::Min { terms } => {
                let vals: Option<Vec<f64>> = terms.iter().map(Self::constant_value).collect();
                vals.filter(|v| !v.is_empty()).map(|v| v.into_iter().fold(f64::INFINITY, f64::min))
            }
            ScalarFieldSpec::Max { terms } => {
                let vals: Option<Vec<f64>> = terms.iter().map(Self::constant_value).collect();
                vals.filter(|v| !v.is_empty()).map(|v| v.into_iter().fold(f64::NEG_INFINITY, f64::max))
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.constant_value() == Some(0.0)
    }
}

#[derive(Debug, Clone)]
enum Bound {
    Constant(f64),
    Coordinate(usize, f64),
    Euclid(Vec<f64>, f64),
    Intrinsic(Box<DistanceRow>, f64),
    Sum(Vec<Bound>),
    Min(Vec<Bound>),
    Max(Vec<Bound>),
}

impl Bound {
    fn eval(&self, oracle: &MetricOracle, p: NetworkPoint, x: &[f64]) -> f64 {
        match self {
            Bound::Constant(c) => *c,
            Bound::Coordinate(k, a) => a * x[*k],
            Bound::Euclid(q, a) => a * dist(q, x),
            Bound::Intrinsic(row, a) => a * oracle.distance_from_row(row, p),
            Bound::Sum(t) => t.iter().map(|b| b.eval(oracle, p, x)).sum(),
            Bound::Min(t) => t.iter().map(|b| b.eval(oracle, p, x)).fold(f64::INFINITY, f64::min),
            Bound::Max(t) => t.iter().map(|b| b.eval(oracle, p, x)).fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// A field spec resolved against one network level.
#[derive(Debug, Clone)]
pub struct BoundField {
    spec: ScalarFieldSpec,
    oracle: Arc<MetricOracle>,
    bound: Bound,
}

/// Tolerance for placing an intrinsic anchor on a level.
pub fn anchor_tolerance(oracle: &MetricOracle) -> f64 {
    1e-6 * oracle.network().diameter().max(f64::MIN_POSITIVE)
}

fn bind(spec: &ScalarFieldSpec, oracle: &MetricOracle) -> Result<Bound, FieldError> {
    let net = oracle.network();
    let finite = |v: f64| if v.is_finite() { Ok(v) } else { Err(FieldError::NonFinite) };
    Ok(match spec {
        ScalarFieldSpec::Constant { value } => Bound::Constant(finite(*value)?),
        ScalarFieldSpec::Coordinate { axis, scale } => {
            if *axis >= net.dim() {
                return Err(FieldError::AxisOutOfRange { axis: *axis, dim: net.dim() });
            }
            Bound::Coordinate(*axis, finite(*scale)?)
        }
        ScalarFieldSpec::EuclidDistTo { point, scale } => {
            if point.len() != net.dim() {
                return Err(FieldError::DimensionMismatch { expected: net.dim(), found: point.len() });
            }
            if !point.iter().all(|c| c.is_finite()) {
                return Err(FieldError::NonFinite);
            }
            Bound::Euclid(point.clone(), finite(*scale)?)
        }
        ScalarFieldSpec::IntrinsicDistTo { anchor, scale } => {
            if anchor.len() != net.dim() {
                return Err(FieldError::DimensionMismatch { expected: net.dim(), found: anchor.len() });
            }
            let (p, d) = net.closest_point(anchor);
            if !(d <= anchor_tolerance(oracle)) {
                return Err(FieldError::AnchorNotOnLevel { anchor: anchor.clone(), distance: d });
            }
            let p = net.canonicalize(p)?;
            let row = oracle.row_from(p).expect("canonical points belong to the network");
            Bound::Intrinsic(Box::new(row), finite(*scale)?)
        }
        ScalarFieldSpec::Sum { terms } | ScalarFieldSpec::Min { terms } | ScalarFieldSpec::Max { terms } => {
            let name = match spec {
                ScalarFieldSpec::Sum { .. } => "sum",
                ScalarFieldSpec::Min { .. } => "min",
                _ => "max",
            };
            if terms.is_empty() {
                return Err(FieldError::EmptyCombination(name));
            }
            let t = terms.iter().map(|s| bind(s, oracle)).collect::<Result<Vec<_>, _>>()?;
            match spec {
                ScalarFieldSpec::Sum { .. } => Bound::Sum(t),
                ScalarFieldSpec::Min { .. } => Bound::Min(t),
                _ => Bound::Max(t),
            }
        }
    })
}

/// Binds `spec` to the level described by `oracle`: the restriction of an
/// ambient field, or an intrinsic field re-resolved against this level's metric.
pub fn restrict_initial(spec: &ScalarFieldSpec, oracle: Arc<MetricOracle>) -> Result<BoundField, FieldError> {
    let bound = bind(spec, &oracle)?;
    Ok(BoundField { spec: spec.clone(), oracle, bound })
}

impl BoundField {
    pub fn spec(&self) -> &ScalarFieldSpec {
        &self.spec
    }

    pub fn oracle(&self) -> &Arc<MetricOracle> {
        &self.oracle
    }

    pub fn value_at(&self, p: NetworkPoint) -> Result<f64, FieldError> {
        let x = self.oracle.network().embed(p)?;
        Ok(self.bound.eval(&self.oracle, p, &x))
    }

    /// Evaluation when the caller already has the embedding `x` of `p`.
    pub fn value_with_coords(&self, p: NetworkPoint, x: &[f64]) -> f64 {
        self.bound.eval(&self.oracle, p, x)
    }

    pub fn structural_lipschitz(&self) -> f64 {
        self.spec.structural_lipschitz()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzBounds {
    pub structural: f64,
    /// Largest sampled difference quotient; never above `structural`.
    pub empirical: f64,
}

/// Structural Lipschitz constant of `spec` on the oracle's network, with an
/// empirical lower bound from difference quotients between vertices and
/// edge midpoints.
pub fn lipschitz_constant(spec: &ScalarFieldSpec, oracle: Arc<MetricOracle>) -> Result<LipschitzBounds, FieldError> {
    let field = restrict_initial(spec, oracle.clone())?;
    let net = oracle.network();
    let mut samples: Vec<NetworkPoint> = (0..net.num_vertices()).map(|v| net.vertex_point(v)).collect();
    samples.extend((0..net.num_edges()).map(|e| NetworkPoint::new(e, 0.5 * net.edge_length(e))));
    let stride = samples.len().div_ceil(400).max(1);
    let samples: Vec<NetworkPoint> = samples.into_iter().step_by(stride).collect();
    let values: Vec<f64> = samples.iter().map(|&p| field.value_at(p)).collect::<Result<_, _>>()?;
    let mut empirical = 0.0_f64;
    for i in 0..samples.len() {
        let row = oracle.row_from(samples[i]).expect("sample on network");
        for j in i + 1..samples.len() {
            let d = oracle.distance_from_row(&row, samples[j]);
            if d > 0.0 {
                empirical = empirical.max((values[i] - values[j]).abs() / d);
            }
        }
    }
    let structural = spec.structural_lipschitz();
    Ok(LipschitzBounds { structural, empirical: empirical.min(structural) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::validate_network;

    fn triangle_oracle() -> Arc<MetricOracle> {
        let h = 3f64.sqrt() / 2.0;
        let net = validate_network(2, &[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, h]], &[[0, 1], [1, 2], [0, 2]]).unwrap();
        Arc::new(MetricOracle::build(Arc::new(net)))
    }

    #[test]
    fn json_round_trip() {
        let spec = ScalarFieldSpec::sum(vec![
            ScalarFieldSpec::constant(3.0),
            ScalarFieldSpec::min(vec![ScalarFieldSpec::coordinate(1), ScalarFieldSpec::euclid_dist_to(vec![0.0, 0.0], 2.0)]),
        ]);
        assert_eq!(ScalarFieldSpec::from_json(&spec.to_json()).unwrap(), spec);
        let parsed = ScalarFieldSpec::from_json(r#"{"kind": "intrinsic_dist_to", "anchor": [0, 0]}"#).unwrap();
        assert_eq!(parsed, ScalarFieldSpec::intrinsic_dist_to(vec![0.0, 0.0], 1.0));
        assert_eq!(ScalarFieldSpec::from_json(r#"{"kind": "bogus"}"#).unwrap_err().kind(), "ParseError");
    }

    #[test]
    fn structural_constants() {
        assert_eq!(ScalarFieldSpec::constant(3.0).structural_lipschitz(), 0.0);
        let d = ScalarFieldSpec::intrinsic_dist_to(vec![0.0, 0.0], 2.0);
        assert_eq!(d.structural_lipschitz(), 2.0);
        let s = ScalarFieldSpec::sum(vec![ScalarFieldSpec::constant(3.0), d.clone()]);
        assert_eq!(s.structural_lipschitz(), 2.0);
        let m = ScalarFieldSpec::max(vec![ScalarFieldSpec::coordinate(0), d]);
        assert_eq!(m.structural_lipschitz(), 2.0);
    }

    #[test]
    fn empirical_bound_is_below_structural() {
        let o = triangle_oracle();
        let spec = ScalarFieldSpec::intrinsic_dist_to(vec![0.0, 0.0], 2.0);
        let b = lipschitz_constant(&spec, o.clone()).unwrap();
        assert_eq!(b.structural, 2.0);
        assert!((b.empirical - 2.0).abs() < 1e-12);
        let b = lipschitz_constant(&ScalarFieldSpec::constant(3.0), o).unwrap();
        assert_eq!(b, LipschitzBounds { structural: 0.0, empirical: 0.0 });
    }

    #[test]
    fn binding_errors() {
        let o = triangle_oracle();
        let off = ScalarFieldSpec::intrinsic_dist_to(vec![0.5, 0.3], 1.0);
        assert_eq!(restrict_initial(&off, o.clone()).unwrap_err().kind(), "AnchorNotOnLevel");
        assert_eq!(restrict_initial(&ScalarFieldSpec::coordinate(2), o.clone()).unwrap_err().kind(), "AxisOutOfRange");
        assert_eq!(restrict_initial(&ScalarFieldSpec::sum(vec![]), o).unwrap_err().kind(), "EmptyCombination");
    }

    #[test]
    fn evaluation() {
        let o = triangle_oracle();
        let g = restrict_initial(&ScalarFieldSpec::intrinsic_dist_to(vec![0.0, 0.0], 1.0), o.clone()).unwrap();
        // The midpoint of the side opposite the anchor is 1.5 away along the network.
        assert!((g.value_at(NetworkPoint::new(1, 0.5)).unwrap() - 1.5).abs() < 1e-15);
        let e = restrict_initial(&ScalarFieldSpec::euclid_dist_to(vec![0.0, 0.0], 1.0), o).unwrap();
        assert!((e.value_at(NetworkPoint::new(1, 0.5)).unwrap() - 0.75f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn constant_detection() {
        assert!(ScalarFieldSpec::constant(0.0).is_zero());
        assert!(ScalarFieldSpec::sum(vec![ScalarFieldSpec::constant(1.0), ScalarFieldSpec::constant(-1.0)]).is_zero());
        assert_eq!(ScalarFieldSpec::coordinate(0).constant_value(), None);
        assert_eq!(ScalarFieldSpec::min(vec![ScalarFieldSpec::constant(2.0), ScalarFieldSpec::constant(-1.0)]).constant_value(), Some(-1.0));
    }
}
