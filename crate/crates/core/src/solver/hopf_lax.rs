use std::sync::Arc;

use rayon::prelude::*;

use super::{check_times, Backend, SolverError, SolverMeta, ValueFunction};
use crate::field::{BoundField, ScalarFieldSpec};
use crate::grid::NetworkGrid;
use crate::tolerances::hopf_lax_tolerance;

/// `min_y delta(x, y)^2 / (2t) + g(y)` over grid nodes `y`, for each query
/// node `x` and each time. Returns `[time][query]`; time 0 gives `g(x)`.
///
/// For fixed `x` each candidate is a line `a s + g(y)` in `s = 1/t` with
/// `a = delta^2 / 2`, so the minimum over candidates is the lower envelope
/// of those lines, built once per query and walked in order of time.
pub fn hopf_lax_values(grid: &NetworkGrid, g: &[f64], times: &[f64], queries: &[usize]) -> Vec<Vec<f64>> {
    let per_query: Vec<Vec<f64>> = queries
        .par_iter()
        .map(|&x| {
            let gx = g[x];
            let d = grid.distances_from(x);
            // Only nodes with a smaller datum can beat y = x.
            let mut lines: Vec<(f64, f64)> = d.iter().zip(g).filter(|&(_, &gy)| gy < gx).map(|(&dy, &gy)| (dy * dy, gy)).collect();
            lines.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
            let hull = lower_envelope(gx, &lines);
            let mut k = 0;
            times
                .iter()
                .map(|&t| {
                    if t == 0.0 {
                        return gx;
                    }
                    let inv = 0.5 / t;
                    let value = |(d2, gy): (f64, f64)| d2 * inv + gy;
                    while k + 1 < hull.len() && value(hull[k + 1]) <= value(hull[k]) {
                        k += 1;
                    }
                    value(hull[k]).min(gx)
                })
                .collect()
        })
        .collect();
    (0..times.len()).map(|k| per_query.iter().map(|row| row[k]).collect()).collect()
}

/// Lines `(d2, b)` sorted by `d2`, plus the flat line `(0, gx)`, reduced to
/// those that attain the minimum for some `s > 0`, ordered from large `s`
/// (small slope) to small `s`.
fn lower_envelope(gx: f64, lines: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = vec![(0.0, gx)];
    // s-coordinate where line `q` starts to beat line `p` (p has the smaller slope).
    let cross = |p: (f64, f64), q: (f64, f64)| (p.1 - q.1) / (q.0 - p.0);
    for &line in lines {
        let last = *hull.last().expect("hull starts non-empty");
        // Only strictly smaller intercepts can ever take over at larger slopes.
        if line.1 >= last.1 {
            continue;
        }
        if line.0 == last.0 {
            hull.pop();
        }
        while hull.len() >= 2 {
            let (p, q) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            if cross(p, line) >= cross(p, q) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(line);
    }
    hull
}

/// Exact-metric solution for zero potential on every grid node.
pub fn hopf_lax_solve(grid: Arc<NetworkGrid>, g: &BoundField, times: &[f64]) -> Result<ValueFunction, SolverError> {
    check_times(times)?;
    let g_vals: Vec<f64> = (0..grid.len()).map(|i| g.value_with_coords(grid.node(i), grid.coords(i))).collect();
    let all: Vec<usize> = (0..grid.len()).collect();
    let values = hopf_lax_values(&grid, &g_vals, times, &all);
    let t_min = times.get(1).copied().unwrap_or(f64::INFINITY);
    let meta = SolverMeta {
        solver: Backend::HopfLax,
        dx: grid.max_gap(),
        dt: None,
        v_max: None,
        g: g.spec().clone(),
        potential: ScalarFieldSpec::constant(0.0),
        tolerance: hopf_lax_tolerance(g.structural_lipschitz(), grid.network().diameter(), grid.max_gap(), t_min),
    };
    Ok(ValueFunction::new(grid, times.to_vec(), values, meta))
}
