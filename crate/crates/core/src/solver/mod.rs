//! Solvers for `u_t + |grad u|^2 / 2 + V(x) = 0`, `u(0, .) = g` on a network
//! grid: the exact metric Hopf-Lax formula when `V = 0`, and a
//! semi-Lagrangian dynamic-programming scheme for general `V`.

mod hopf_lax;
mod semi_lagrangian;
mod value;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use hopf_lax::{hopf_lax_solve, hopf_lax_values};
pub use semi_lagrangian::{semi_lagrangian_solve, SemiLagrangianParams};
pub use value::{read_value_csv, ValueCsvRow, ValueFunction};

use crate::field::{restrict_initial, FieldError, ScalarFieldSpec};
use crate::grid::NetworkGrid;
use crate::network::{EmbeddedNetwork, NetworkPoint};

/// Number of equal time intervals in the default output ladder.
pub const DEFAULT_TIME_DIVISIONS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("times must start at 0 and increase strictly (violated at index {0})")]
    NonMonotoneTimes(usize),
    #[error("time step must be positive and finite, got {0}")]
    NonPositiveStep(f64),
    #[error("reach v_max * dt = {reach} is below the grid gap {dx}")]
    CFLViolation { reach: f64, dx: f64 },
    #[error("time {t} is outside [0, {max}]")]
    TimeOutOfRange { t: f64, max: f64 },
    #[error("point {0:?} does not belong to this grid's network")]
    ForeignPoint(NetworkPoint),
    #[error("the Hopf-Lax backend needs a zero potential")]
    UnsupportedPotential,
    #[error("value functions live on different grids or time ladders")]
    GridMismatch,
    #[error("invalid value table: {0}")]
    Parse(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

impl SolverError {
    pub fn kind(&self) -> &'static str {
        match self {
            SolverError::NonMonotoneTimes(_) => "NonMonotoneTimes",
            SolverError::NonPositiveStep(_) => "NonPositiveStep",
            SolverError::CFLViolation { .. } => "CFLViolation",
            SolverError::TimeOutOfRange { .. } => "TimeOutOfRange",
            SolverError::ForeignPoint(_) => "ForeignPoint",
            SolverError::UnsupportedPotential => "UnsupportedPotential",
            SolverError::GridMismatch => "GridMismatch",
            SolverError::Parse(_) => "ParseError",
            SolverError::Field(e) => e.kind(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    HopfLax,
    SemiLagrangian,
    /// Hopf-Lax for a zero potential, semi-Lagrangian otherwise.
    Auto,
}

/// Provenance of a computed value function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverMeta {
    pub solver: Backend,
    pub dx: f64,
    pub dt: Option<f64>,
    pub v_max: Option<f64>,
    pub g: ScalarFieldSpec,
    pub potential: ScalarFieldSpec,
    /// Certified (Hopf-Lax) or calibrated (semi-Lagrangian) error bound.
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub backend: Backend,
    pub horizon: f64,
    /// Semi-Lagrangian step; defaults to `dx^(2/3)`.
    pub dt: Option<f64>,
    pub v_max: Option<f64>,
    /// Defaults to multiples of `horizon / 64`.
    pub times: Option<Vec<f64>>,
}

impl SolveConfig {
    pub fn new(backend: Backend, horizon: f64) -> Self {
        SolveConfig { backend, horizon, dt: None, v_max: None, times: None }
    }
}

/// Default spacing: an eighth of the shortest edge.
pub fn default_dx(net: &EmbeddedNetwork) -> f64 {
    net.min_edge_length() / 8.0
}

/// Default semi-Lagrangian step. With `dt = dx` the speed quantization
/// error `~ (dx / dt)^2` would not vanish under refinement.
pub fn default_dt(dx: f64, horizon: f64) -> f64 {
    dx.powf(2.0 / 3.0).min(horizon)
}

/// `0, T/k, 2T/k, ..., T`.
pub fn uniform_times(horizon: f64, divisions: usize) -> Vec<f64> {
    (0..=divisions).map(|k| horizon * k as f64 / divisions as f64).collect()
}

pub(crate) fn check_times(times: &[f64]) -> Result<(), SolverError> {
    match times.first() {
        Some(&t) if t == 0.0 => {}
        _ => return Err(SolverError::NonMonotoneTimes(0)),
    }
    if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0] && w[1].is_finite())) {
        return Err(SolverError::NonMonotoneTimes(i + 1));
    }
    Ok(())
}

/// Binds the fields to the grid's level and runs the chosen backend.
pub fn solve(grid: Arc<NetworkGrid>, g: &ScalarFieldSpec, potential: &ScalarFieldSpec, config: &SolveConfig) -> Result<ValueFunction, SolverError> {
    if !(config.horizon > 0.0 && config.horizon.is_finite()) {
        return Err(SolverError::NonPositiveStep(config.horizon));
    }
    let times = config.times.clone().unwrap_or_else(|| uniform_times(config.horizon, DEFAULT_TIME_DIVISIONS));
    let gb = restrict_initial(g, grid.oracle().clone())?;
    let backend = match config.backend {
        Backend::Auto if potential.is_zero() => Backend::HopfLax,
        Backend::Auto => Backend::SemiLagrangian,
        b => b,
    };
    match backend {
        Backend::HopfLax => {
            if !potential.is_zero() {
                return Err(SolverError::UnsupportedPotential);
            }
            hopf_lax_solve(grid, &gb, &times)
        }
        _ => {
            let vb = restrict_initial(potential, grid.oracle().clone())?;
            let params = SemiLagrangianParams { horizon: config.horizon, dt: config.dt, v_max: config.v_max };
            semi_lagrangian_solve(grid, &gb, &vb, &params, &times)
        }
    }
}

#[cfg(test)]
mod tests;
