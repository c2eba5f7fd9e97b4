//! Semi-Lagrangian constant calibration on the dyadic level-4 network.

use std::sync::Arc;

use hjnet::solver::{default_dx, hopf_lax_values, solve, Backend, SolveConfig};
use hjnet::tolerances::SEMI_LAGRANGIAN_CONSTANT;
use hjnet::{dyadic_network, MetricOracle, NetworkGrid, ScalarFieldSpec};

fn calibration_suite() -> Vec<ScalarFieldSpec> {
    vec![
        ScalarFieldSpec::euclid_dist_to(vec![1.0], 1.0),
        ScalarFieldSpec::euclid_dist_to(vec![-1.0], 0.6),
        ScalarFieldSpec::coordinate(0),
        ScalarFieldSpec::intrinsic_dist_to(vec![0.5], 1.0),
        ScalarFieldSpec::min(vec![
            ScalarFieldSpec::euclid_dist_to(vec![0.2], 1.0),
            ScalarFieldSpec::euclid_dist_to(vec![0.8], 1.0),
        ]),
    ]
}

#[test]
fn semi_lagrangian_constant_covers_calibration_suite() {
    let net = Arc::new(dyadic_network(4).unwrap());
    let oracle = Arc::new(MetricOracle::build(net.clone()));
    let grid = Arc::new(NetworkGrid::build(oracle, default_dx(&net)).unwrap());
    let zero = ScalarFieldSpec::constant(0.0);
    let mut worst = 0.0_f64;
    for g in calibration_suite() {
        let sl = solve(grid.clone(), &g, &zero, &SolveConfig::new(Backend::SemiLagrangian, 0.5)).unwrap();
        let g0 = sl.at(0).to_vec();
        let all: Vec<usize> = (0..grid.len()).collect();
        let hl = hopf_lax_values(&grid, &g0, sl.times(), &all);
        let diff = sl.values().iter().zip(&hl).flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs())).fold(0.0, f64::max);
        let dt = sl.meta().dt.unwrap();
        let ratio = diff / (dt + sl.meta().dx);
        println!("calibration {}: max|SL-HL| = {diff:.3e}, ratio = {ratio:.4}", g.to_json());
        worst = worst.max(ratio);
    }
    println!("calibration worst ratio {worst:.4} (frozen constant {SEMI_LAGRANGIAN_CONSTANT})");
    assert!(2.0 * worst <= SEMI_LAGRANGIAN_CONSTANT);
}

