//! Hamilton-Jacobi equations `u_t + |grad u|^2 / 2 + V = 0` on networks of
//! straight segments, solved level by level on expanding network sequences.

pub mod field;
pub mod generators;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod hausdorff;
pub mod metric;
pub mod network;
pub mod slope;
pub mod solver;
pub mod tolerances;

pub use field::{lipschitz_constant, restrict_initial, BoundField, FieldError, ScalarFieldSpec};
pub use generators::{dyadic_network, sierpinski_prefractal, verify_expanding, ExpandingSequence, GeneratorError, StabilizationMode};
pub use grid::NetworkGrid;
pub use harness::{check_comparison_pair, emit_report, run_stability, HarnessConfig, HarnessError, StabilityReport};
pub use hausdorff::{dist_to_network, directed_hausdorff, hausdorff_distance, HausdorffReport};
pub use metric::{curve_length, metric_speed, MetricError, MetricOracle, NetworkPath};
pub use network::{validate_network, EmbeddedNetwork, NetworkError, NetworkPoint};
pub use solver::{hopf_lax_solve, semi_lagrangian_solve, solve, Backend, SolveConfig, SolverError, ValueFunction};
