use std::sync::Arc;

use super::*;
use crate::generators::{dyadic_network, sierpinski_prefractal, DEFAULT_CORNERS};
use crate::metric::MetricOracle;

fn grid_on(net: EmbeddedNetwork, dx: f64) -> Arc<NetworkGrid> {
    let oracle = Arc::new(MetricOracle::build(Arc::new(net)));
    Arc::new(NetworkGrid::build(oracle, dx).unwrap())
}

fn nearest_node(grid: &NetworkGrid, x: f64) -> usize {
    grid.find_node(&[x], grid.max_gap()).unwrap()
}

#[test]
fn constant_data_is_stationary() {
    let grid = grid_on(sierpinski_prefractal(1, &DEFAULT_CORNERS).unwrap(), 1.0 / 16.0);
    let c = ScalarFieldSpec::constant(2.5);
    let zero = ScalarFieldSpec::constant(0.0);
    for backend in [Backend::HopfLax, Backend::SemiLagrangian] {
        let vf = solve(grid.clone(), &c, &zero, &SolveConfig::new(backend, 0.5)).unwrap();
        assert!(vf.values().iter().flatten().all(|&u| u == 2.5));
    }
    let vf = solve(grid, &zero, &zero, &SolveConfig::new(Backend::SemiLagrangian, 0.5)).unwrap();
    assert!(vf.values().iter().flatten().all(|&u| u == 0.0));
}

#[test]
fn hopf_lax_on_the_unit_interval() {
    let grid = grid_on(dyadic_network(10).unwrap(), 1.0 / 8192.0);
    let g = ScalarFieldSpec::coordinate(0);
    let mut config = SolveConfig::new(Backend::HopfLax, 0.2);
    config.times = Some(vec![0.0, 0.2]);
    let vf = solve(grid.clone(), &g, &ScalarFieldSpec::constant(0.0), &config).unwrap();
    let tol = vf.tolerance();
    // Nodes nearest to x = 0.9 (interior minimizer) and x = 0.1 (clamped at 0).
    let (i, j) = (nearest_node(&grid, 0.9), nearest_node(&grid, 0.1));
    let (x, y) = (grid.coords(i)[0], grid.coords(j)[0]);
    assert!((vf.at(1)[i] - (x - 0.1)).abs() <= tol);
    assert!((vf.at(1)[j] - y * y / 0.4).abs() <= tol);
    assert!((x - 0.9).abs() < 1e-4 && (vf.at(1)[i] - 0.8).abs() < 2e-4);
    // g - Lg^2 t / 2 <= u <= g
    for (i, &u) in vf.at(1).iter().enumerate() {
        let gx = grid.coords(i)[0];
        assert!(u <= gx && u >= gx - 0.1 - 1e-15);
    }
}

#[test]
fn times_must_increase_from_zero() {
    let grid = grid_on(dyadic_network(2).unwrap(), 0.125);
    let g = ScalarFieldSpec::coordinate(0);
    let zero = ScalarFieldSpec::constant(0.0);
    let mut config = SolveConfig::new(Backend::HopfLax, 1.0);
    config.times = Some(vec![0.0, 0.5, 0.5]);
    assert_eq!(solve(grid.clone(), &g, &zero, &config).unwrap_err(), SolverError::NonMonotoneTimes(2));
    config.times = Some(vec![0.1, 0.5]);
    assert_eq!(solve(grid, &g, &zero, &config).unwrap_err().kind(), "NonMonotoneTimes");
}

#[test]
fn constant_potential_shifts_linearly_in_time() {
    let grid = grid_on(sierpinski_prefractal(2, &DEFAULT_CORNERS).unwrap(), 1.0 / 32.0);
    let g = ScalarFieldSpec::euclid_dist_to(vec![0.0, 0.0], 1.0);
    let c = 0.7;
    let base = solve(grid.clone(), &g, &ScalarFieldSpec::constant(0.0), &SolveConfig::new(Backend::SemiLagrangian, 0.5)).unwrap();
    let mut config = SolveConfig::new(Backend::SemiLagrangian, 0.5);
    // Same reach as the zero-potential run so that the stencils coincide.
    config.v_max = base.meta().v_max;
    let shifted = solve(grid, &g, &ScalarFieldSpec::constant(-c), &config).unwrap();
    assert_eq!(base.times(), shifted.times());
    for ((t, a), b) in base.times().iter().zip(base.values()).zip(shifted.values()) {
        for (x, y) in a.iter().zip(b) {
            assert!((y - x - c * t).abs() < 1e-12);
        }
    }
}

#[test]
fn semi_lagrangian_step_checks() {
    let grid = grid_on(dyadic_network(3).unwrap(), 1.0 / 64.0);
    let g = ScalarFieldSpec::coordinate(0);
    let zero = ScalarFieldSpec::constant(0.0);
    let mut config = SolveConfig::new(Backend::SemiLagrangian, 0.5);
    config.dt = Some(1e-4);
    assert_eq!(solve(grid.clone(), &g, &zero, &config).unwrap_err().kind(), "CFLViolation");
    config.dt = Some(-1.0);
    assert_eq!(solve(grid.clone(), &g, &zero, &config).unwrap_err().kind(), "NonPositiveStep");
    let config = SolveConfig::new(Backend::HopfLax, 0.5);
    assert_eq!(solve(grid, &g, &ScalarFieldSpec::constant(1.0), &config).unwrap_err(), SolverError::UnsupportedPotential);
}

#[test]
fn semi_lagrangian_matches_hopf_lax() {
    let grid = grid_on(dyadic_network(4).unwrap(), 1.0 / 128.0);
    let g = ScalarFieldSpec::euclid_dist_to(vec![1.0], 1.0);
    let zero = ScalarFieldSpec::constant(0.0);
    let sl = solve(grid.clone(), &g, &zero, &SolveConfig::new(Backend::SemiLagrangian, 0.5)).unwrap();
    let mut config = SolveConfig::new(Backend::HopfLax, 0.5);
    config.times = Some(sl.times().to_vec());
    let hl = solve(grid, &g, &zero, &config).unwrap();
    let diff = sl.values().iter().flatten().zip(hl.values().iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff <= sl.tolerance());
}

#[test]
fn evaluation_and_interpolation() {
    let grid = grid_on(dyadic_network(1).unwrap(), 0.25);
    let meta = SolverMeta {
        solver: Backend::HopfLax,
        dx: 0.25,
        dt: None,
        v_max: None,
        g: ScalarFieldSpec::constant(0.0),
        potential: ScalarFieldSpec::constant(0.0),
        tolerance: 0.0,
    };
    // Nodes: vertex 0 (x=0), vertex 1 (x=1/2), interior x=1/4.
    let vf = ValueFunction::new(grid.clone(), vec![0.0, 1.0], vec![vec![1.0, 5.0, 3.0], vec![0.0, 0.0, 0.0]], meta.clone());
    assert_eq!(vf.evaluate(0.0, NetworkPoint::new(0, 0.25)).unwrap(), 3.0);
    assert_eq!(vf.evaluate(0.0, NetworkPoint::new(0, 0.125)).unwrap(), 2.0);
    assert_eq!(vf.evaluate(0.4, NetworkPoint::new(0, 0.5)).unwrap(), 5.0);
    assert_eq!(vf.evaluate(0.6, NetworkPoint::new(0, 0.5)).unwrap(), 0.0);
    assert_eq!(vf.evaluate(1.5, NetworkPoint::new(0, 0.0)).unwrap_err().kind(), "TimeOutOfRange");
    assert_eq!(vf.evaluate(0.0, NetworkPoint::new(3, 0.0)).unwrap_err().kind(), "ForeignPoint");

    let csv = vf.to_csv();
    assert!(csv.starts_with("t,edge,s,x1,u\n0,0,0,0,1\n"));
    let back = ValueFunction::from_csv(grid, meta, &csv).unwrap();
    assert_eq!(back.values(), vf.values());
    assert_eq!(back.times(), vf.times());
}

#[test]
fn restriction_to_levels() {
    let o3 = Arc::new(MetricOracle::build(Arc::new(dyadic_network(3).unwrap())));
    let o5 = Arc::new(MetricOracle::build(Arc::new(dyadic_network(5).unwrap())));
    let coord = ScalarFieldSpec::coordinate(0);
    let half3 = o3.network().locate_point(&[0.5], 1e-12).unwrap();
    let half5 = o5.network().locate_point(&[0.5], 1e-12).unwrap();
    let a = crate::field::restrict_initial(&coord, o3).unwrap().value_at(half3).unwrap();
    let b = crate::field::restrict_initial(&coord, o5).unwrap().value_at(half5).unwrap();
    assert_eq!(a, b);

    let s1 = Arc::new(MetricOracle::build(Arc::new(sierpinski_prefractal(1, &DEFAULT_CORNERS).unwrap())));
    let s2 = Arc::new(MetricOracle::build(Arc::new(sierpinski_prefractal(2, &DEFAULT_CORNERS).unwrap())));
    let spec = ScalarFieldSpec::intrinsic_dist_to(vec![0.0, 0.0], 1.0);
    let mid = [0.75, DEFAULT_CORNERS[2][1] / 2.0];
    let f1 = crate::field::restrict_initial(&spec, s1.clone()).unwrap();
    let f2 = crate::field::restrict_initial(&spec, s2.clone()).unwrap();
    let v1 = f1.value_at(s1.network().locate_point(&mid, 1e-9).unwrap()).unwrap();
    let v2 = f2.value_at(s2.network().locate_point(&mid, 1e-9).unwrap()).unwrap();
    assert!(v2 <= v1 + 1e-12);
    assert!((v1 - 1.0).abs() < 1e-12);
}
