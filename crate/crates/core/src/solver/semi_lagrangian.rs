use std::sync::Arc;

use rayon::prelude::*;

use super::{default_dt, Backend, SolverError, SolverMeta, ValueFunction};
use crate::field::BoundField;
use crate::grid::NetworkGrid;
use crate::tolerances::semi_lagrangian_tolerance;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiLagrangianParams {
    pub horizon: f64,
    /// Requested step, shrunk so that it divides the horizon. Defaults to `dx^(2/3)`.
    pub dt: Option<f64>,
    /// Largest admissible speed. Defaults to `Lg + T Lip(V) + 1`.
    pub v_max: Option<f64>,
}

/// Backward dynamic programming
/// `u^{k+1}(x) = min_{delta(x,y) <= v_max dt} delta^2 / (2 dt) - dt V(x) + u^k(y)`
/// from `u^0 = g`. Stored times are the step times nearest to `times`.
pub fn semi_lagrangian_solve(
    grid: Arc<NetworkGrid>,
    g: &BoundField,
    potential: &BoundField,
    params: &SemiLagrangianParams,
    times: &[f64],
) -> Result<ValueFunction, SolverError> {
    let horizon = params.horizon;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(SolverError::NonPositiveStep(horizon));
    }
    super::check_times(times)?;
    let dx = grid.max_gap();
    let requested = params.dt.unwrap_or_else(|| default_dt(grid.dx(), horizon));
    if !(requested > 0.0 && requested.is_finite()) {
        return Err(SolverError::NonPositiveStep(requested));
    }
    let steps = ((horizon / requested) - 1e-9).ceil().max(1.0) as usize;
    let dt = horizon / steps as f64;
    let lg = g.structural_lipschitz();
    let v_max = params.v_max.unwrap_or(lg + horizon * potential.structural_lipschitz() + 1.0);
    let reach = v_max * dt;
    if !(reach >= dx) {
        return Err(SolverError::CFLViolation { reach, dx });
    }

    let n = grid.len();
    let u0: Vec<f64> = (0..n).map(|i| g.value_with_coords(grid.node(i), grid.coords(i))).collect();
    let v_dt: Vec<f64> = (0..n).map(|i| dt * potential.value_with_coords(grid.node(i), grid.coords(i))).collect();
    let inv = 0.5 / dt;
    let stencils: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| grid.nodes_within(i, reach).into_iter().map(|(j, d)| (j, d * d * inv)).collect())
        .collect();

    let mut wanted: Vec<usize> = times
        .iter()
        .filter(|&&t| t <= horizon * (1.0 + 1e-12))
        .map(|&t| ((t / dt).round() as usize).min(steps))
        .collect();
    wanted.dedup();

    let mut out_times = Vec::with_capacity(wanted.len());
    let mut out_values = Vec::with_capacity(wanted.len());
    let mut next = wanted.iter().peekable();
    let mut u = u0;
    for k in 0..=steps {
        if k > 0 {
            u = stencils
                .par_iter()
                .zip(&v_dt)
                .map(|(st, &vd)| st.iter().map(|&(j, cost)| cost + u[j]).fold(f64::INFINITY, f64::min) - vd)
                .collect();
        }
        while next.peek() == Some(&&k) {
            next.next();
            out_times.push(k as f64 * dt);
            out_values.push(u.clone());
        }
        if next.peek().is_none() {
            break;
        }
    }
    let meta = SolverMeta {
        solver: Backend::SemiLagrangian,
        dx,
        dt: Some(dt),
        v_max: Some(v_max),
        g: g.spec().clone(),
        potential: potential.spec().clone(),
        tolerance: semi_lagrangian_tolerance(dx, dt),
    };
    Ok(ValueFunction::new(grid, out_times, out_values, meta))
}
