//! Level-by-level solves on an expanding sequence, with the a priori
//! estimates checked on every level and the convergence of `u_n` towards the
//! finest computed level `u_N`, which stands in for the limit solution.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::field::{restrict_initial, FieldError, ScalarFieldSpec};
use crate::generators::{ExpandingSequence, SequenceKind};
use crate::grid::{GridError, NetworkGrid};
use crate::hausdorff::{default_step, hausdorff_distance, HausdorffError};
use crate::metric::MetricOracle;
use crate::solver::{default_dx, solve, uniform_times, Backend, SolveConfig, SolverError, ValueFunction, DEFAULT_TIME_DIVISIONS};
use crate::tolerances::{CONVERGENCE_FACTOR, MONOTONE_FACTOR};

pub const REPORT_NAME: &str = "report.json";
pub const CONVERGENCE_CSV_NAME: &str = "convergence.csv";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("level {0} is not part of the sequence")]
    LevelNotGenerated(usize),
    #[error("invalid level selection: {0}")]
    InvalidLevels(String),
    #[error("node at {coords:?} of level {level} has no counterpart on the level {target} grid")]
    GridMismatch { level: usize, target: usize, coords: Vec<f64> },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Hausdorff(#[from] HausdorffError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl HarnessError {
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::LevelNotGenerated(_) => "LevelNotGenerated",
            HarnessError::InvalidLevels(_) => "InvalidLevels",
            HarnessError::GridMismatch { .. } => "GridMismatch",
            HarnessError::Solver(e) => e.kind(),
            HarnessError::Field(e) => e.kind(),
            HarnessError::Grid(e) => e.kind(),
            HarnessError::Hausdorff(e) => e.kind(),
            HarnessError::Io(_) => "IoError",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnessConfig {
    pub backend: Backend,
    pub horizon: f64,
    /// Shared grid spacing; defaults to an eighth of the finest level's shortest edge.
    pub dx: Option<f64>,
    pub dt: Option<f64>,
    pub v_max: Option<f64>,
    pub time_divisions: usize,
    /// Multiplies every scheme tolerance used by the checks.
    pub tol_scale: f64,
    /// Overrides `CONVERGENCE_FACTOR * tol` at the finest level.
    pub tol_conv: Option<f64>,
    /// Source nodes per level for the Lipschitz check (all targets are used).
    pub lipschitz_sources: usize,
    /// Number of positive stored times used by the initial sandwich check.
    pub sandwich_times: usize,
}

impl HarnessConfig {
    pub fn new(horizon: f64) -> Self {
        HarnessConfig {
            backend: Backend::Auto,
            horizon,
            dx: None,
            dt: None,
            v_max: None,
            time_divisions: DEFAULT_TIME_DIVISIONS,
            tol_scale: 1.0,
            tol_conv: None,
            lipschitz_sources: 64,
            sandwich_times: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceSummary {
    pub kind: SequenceKind,
    pub first_level: usize,
    pub last_level: usize,
    pub m_levels: Vec<usize>,
    pub n_levels: Vec<usize>,
    /// Level whose solution stands in for the limit.
    pub proxy_level: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSummary {
    pub level: usize,
    pub nodes: usize,
    pub solver: Backend,
    pub dx: f64,
    pub dt: Option<f64>,
    pub v_max: Option<f64>,
    pub tolerance: f64,
}

/// Constants of the a priori estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateConstants {
    /// Lipschitz constant of `g`.
    pub lg: f64,
    /// `C = sup |r^2 / 2 + V(x)|` over `0 <= r <= lg`.
    pub c: f64,
    pub max_v_plus: f64,
    /// `K = sqrt(6 C + 2 max V+)`.
    pub k: f64,
}

impl EstimateConstants {
    pub fn new(lg: f64, v_min: f64, v_max: f64) -> Self {
        let c = [v_min.abs(), v_max.abs(), (0.5 * lg * lg + v_min).abs(), (0.5 * lg * lg + v_max).abs()].into_iter().fold(0.0, f64::max);
        let max_v_plus = v_max.max(0.0);
        EstimateConstants { lg, c, max_v_plus, k: (6.0 * c + 2.0 * max_v_plus).sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub formula: String,
    pub m: Option<usize>,
    pub n: usize,
    /// Constant on the right-hand side (`2K`, `C`, ...); 0 when there is none.
    pub bound: f64,
    /// Worst observed quantity bounded by `bound` (largest quotient, ...).
    pub measured: f64,
    /// Largest `lhs - rhs` over all tested points, before the tolerance.
    pub excess: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceEntry {
    pub m: usize,
    pub n: usize,
    /// `sup |u_n - u_N|` over stored times and level-`m` grid nodes.
    pub sup_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelVerdict {
    pub m: usize,
    pub nonincreasing: bool,
    /// Entry at the last level below the proxy.
    pub last_entry: f64,
    pub tol_conv: f64,
    pub converged: bool,
}

/// Exploratory log-log slope of `sup |u_n - u_N|` against `d_H(N^n, N^N)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEntry {
    pub m: usize,
    /// `(n, d_H, sup_diff)`.
    pub points: Vec<(usize, f64, f64)>,
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    /// All convergence statements are relative to the proxy level.
    pub convergence_target: String,
    pub sequence: SequenceSummary,
    pub g: ScalarFieldSpec,
    pub potential: ScalarFieldSpec,
    pub horizon: f64,
    pub tol_scale: f64,
    pub constants: EstimateConstants,
    pub levels: Vec<LevelSummary>,
    pub checks: Vec<CheckResult>,
    pub convergence_table: Vec<ConvergenceEntry>,
    pub verdicts: Vec<LevelVerdict>,
    pub rates: Vec<RateEntry>,
}

impl StabilityReport {
    pub fn checks_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a CheckResult> + 'a {
        self.checks.iter().filter(move |c| c.name == name)
    }

    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn converged(&self, m: usize) -> bool {
        self.verdicts.iter().any(|v| v.m == m && v.converged)
    }

    pub fn column(&self, m: usize) -> Vec<ConvergenceEntry> {
        self.convergence_table.iter().copied().filter(|e| e.m == m).collect()
    }

    pub fn convergence_csv(&self) -> String {
        let mut out = String::from("m,n,sup_diff\n");
        for e in &self.convergence_table {
            out.push_str(&format!("{},{},{:e}\n", e.m, e.n, e.sup_diff));
        }
        out
    }
}

struct Level {
    n: usize,
    grid: Arc<NetworkGrid>,
    vf: ValueFunction,
    g: Vec<f64>,
}

fn node_map(from: &NetworkGrid, from_level: usize, to: &NetworkGrid, to_level: usize) -> Result<Vec<usize>, HarnessError> {
    let tol = 1e-9 * to.network().diameter().max(1.0);
    (0..from.len())
        .map(|i| {
            to.find_node(from.coords(i), tol)
                .ok_or_else(|| HarnessError::GridMismatch { level: from_level, target: to_level, coords: from.coords(i).to_vec() })
        })
        .collect()
}

fn sorted_levels(levels: &[usize]) -> Vec<usize> {
    let mut out = levels.to_vec();
    out.sort_unstable();
    out.dedup();
    out
}

/// Least-squares slope of `y` against `x`.
fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let k = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Solves on every level of `n_levels` with one shared grid spacing and
/// time ladder, then runs the monotonicity, Lipschitz, initial sandwich and
/// convergence checks. The largest level of `n_levels` is the proxy `N`.
pub fn run_stability(
    seq: &ExpandingSequence,
    g: &ScalarFieldSpec,
    potential: &ScalarFieldSpec,
    config: &HarnessConfig,
    m_levels: &[usize],
    n_levels: &[usize],
) -> Result<StabilityReport, HarnessError> {
    let n_levels = sorted_levels(n_levels);
    let m_levels = sorted_levels(m_levels);
    for &l in n_levels.iter().chain(&m_levels) {
        if seq.level(l).is_none() {
            return Err(HarnessError::LevelNotGenerated(l));
        }
    }
    let (Some(&proxy), false) = (n_levels.last(), m_levels.is_empty()) else {
        return Err(HarnessError::InvalidLevels("both level lists must be non-empty".into()));
    };
    if let Some(m) = m_levels.iter().find(|m| !n_levels.contains(m)) {
        return Err(HarnessError::InvalidLevels(format!("m = {m} is not among the n levels")));
    }

    let finest = seq.level(proxy).expect("checked above");
    let dx = config.dx.unwrap_or_else(|| default_dx(finest));
    let times = uniform_times(config.horizon, config.time_divisions.max(1));
    let solve_config = SolveConfig { backend: config.backend, horizon: config.horizon, dt: config.dt, v_max: config.v_max, times: Some(times.clone()) };

    let mut levels: Vec<Level> = Vec::with_capacity(n_levels.len());
    for &n in &n_levels {
        let net = Arc::new(seq.level(n).expect("checked above").clone());
        let grid = Arc::new(NetworkGrid::build(Arc::new(MetricOracle::build(net)), dx)?);
        let vf = solve(grid.clone(), g, potential, &solve_config)?;
        let gb = restrict_initial(g, grid.oracle().clone())?;
        let g_vals = (0..grid.len()).map(|i| gb.value_with_coords(grid.node(i), grid.coords(i))).collect();
        levels.push(Level { n, grid, vf, g: g_vals });
    }

    // The semi-Lagrangian backend snaps requested times to its step ladder.
    let times = levels[0].vf.times().to_vec();
    if levels.iter().any(|l| l.vf.times() != times.as_slice()) {
        return Err(SolverError::GridMismatch.into());
    }
    let proxy_level = levels.last().expect("non-empty");
    let lg = restrict_initial(g, proxy_level.grid.oracle().clone())?.structural_lipschitz();
    let vb = restrict_initial(potential, proxy_level.grid.oracle().clone())?;
    let (v_min, v_max) = (0..proxy_level.grid.len())
        .map(|i| vb.value_with_coords(proxy_level.grid.node(i), proxy_level.grid.coords(i)))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let constants = EstimateConstants::new(lg, v_min, v_max);
    let scaled_tol = |l: &Level| config.tol_scale * l.vf.tolerance();

    let mut checks = Vec::new();

    // Monotone decrease along consecutive levels, on every node of the smaller one.
    for pair in levels.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let map = node_map(&a.grid, a.n, &b.grid, b.n)?;
        let mut excess = f64::NEG_INFINITY;
        for k in 0..times.len() {
            let (ua, ub) = (a.vf.at(k), b.vf.at(k));
            for (i, &j) in map.iter().enumerate() {
                excess = excess.max(ub[j] - ua[i]);
            }
        }
        let tolerance = MONOTONE_FACTOR * scaled_tol(a).max(scaled_tol(b));
        checks.push(CheckResult {
            name: "monotone".into(),
            formula: format!("u_{}(t,x) <= u_{}(t,x) + tol_mono", b.n, a.n),
            m: None,
            n: a.n,
            bound: 0.0,
            measured: excess,
            excess,
            tolerance,
            passed: excess <= tolerance,
        });
    }

    // Uniform Lipschitz bound in the level's own metric.
    let two_k = 2.0 * constants.k;
    for l in &levels {
        let sources = strided(l.grid.len(), config.lipschitz_sources);
        let (quotient, excess) = lipschitz_scan(&l.grid, &l.vf, &sources, None, two_k);
        let tolerance = MONOTONE_FACTOR * scaled_tol(l);
        checks.push(CheckResult {
            name: "lipschitz".into(),
            formula: format!("|u(t,y) - u(t,x)| <= 2K delta_{}(x,y) + tol", l.n),
            m: None,
            n: l.n,
            bound: two_k,
            measured: quotient,
            excess,
            tolerance,
            passed: excess <= tolerance,
        });
    }

    // Initial sandwich at the first few positive times.
    for l in &levels {
        let mut excess = f64::NEG_INFINITY;
        let mut quotient = 0.0_f64;
        for k in 1..=config.sandwich_times.min(times.len() - 1) {
            let t = times[k];
            for (u, g0) in l.vf.at(k).iter().zip(&l.g) {
                let gap = (u - g0).abs();
                excess = excess.max(gap - constants.c * t);
                quotient = quotient.max(gap / t);
            }
        }
        let tolerance = MONOTONE_FACTOR * scaled_tol(l);
        checks.push(CheckResult {
            name: "sandwich".into(),
            formula: format!("|u_{}(t,x) - g(x)| <= C t + tol", l.n),
            m: None,
            n: l.n,
            bound: constants.c,
            measured: quotient,
            excess,
            tolerance,
            passed: excess <= tolerance,
        });
    }

    // Convergence columns against the proxy on each level-m grid.
    let proxy_tol = config.tol_scale * proxy_level.vf.tolerance();
    let tol_conv = config.tol_conv.unwrap_or(CONVERGENCE_FACTOR * proxy_tol);
    let mut convergence_table = Vec::new();
    let mut verdicts = Vec::new();
    let mut rates = Vec::new();
    let hausdorff: Vec<f64> = levels
        .iter()
        .map(|l| hausdorff_distance(l.grid.network(), proxy_level.grid.network(), default_step(proxy_level.grid.network())).map(|r| r.value))
        .collect::<Result<_, _>>()?;
    for &m in &m_levels {
        let base = levels.iter().find(|l| l.n == m).expect("m is among the n levels");
        let to_proxy = node_map(&base.grid, m, &proxy_level.grid, proxy)?;
        let mut column = Vec::new();
        for l in levels.iter().filter(|l| l.n >= m) {
            let to_level = node_map(&base.grid, m, &l.grid, l.n)?;
            let mut sup = 0.0_f64;
            for k in 0..times.len() {
                let (ul, un) = (l.vf.at(k), proxy_level.vf.at(k));
                for (&i, &j) in to_level.iter().zip(&to_proxy) {
                    sup = sup.max((ul[i] - un[j]).abs());
                }
            }
            column.push(ConvergenceEntry { m, n: l.n, sup_diff: sup });
            if l.n < proxy {
                sup_diff_lipschitz(&mut checks, base, l, &to_level, config, two_k, MONOTONE_FACTOR * scaled_tol(l));
            }
        }
        let nonincreasing = column.windows(2).all(|w| w[1].sup_diff <= w[0].sup_diff * (1.0 + 1e-12) + 1e-15);
        let last_entry = column.iter().rev().find(|e| e.n < proxy).map_or(0.0, |e| e.sup_diff);
        verdicts.push(LevelVerdict { m, nonincreasing, last_entry, tol_conv, converged: nonincreasing && last_entry <= tol_conv });
        let points: Vec<(usize, f64, f64)> = levels
            .iter()
            .zip(&hausdorff)
            .zip(&column)
            .filter(|((l, _), _)| l.n >= m && l.n < proxy)
            .map(|((l, &d), e)| (l.n, d, e.sup_diff))
            .collect();
        let fit: Vec<(f64, f64)> = points.iter().filter(|p| p.1 > 0.0 && p.2 > 0.0).map(|p| (p.1, p.2)).collect();
        rates.push(RateEntry { m, points, slope: loglog_slope(&fit) });
        convergence_table.extend(column);
    }

    Ok(StabilityReport {
        convergence_target: format!("proxy u_{proxy}"),
        sequence: SequenceSummary { kind: seq.kind, first_level: seq.first_level, last_level: seq.last_level(), m_levels, n_levels: n_levels.clone(), proxy_level: proxy },
        g: g.clone(),
        potential: potential.clone(),
        horizon: config.horizon,
        tol_scale: config.tol_scale,
        constants,
        levels: levels
            .iter()
            .map(|l| {
                let meta = l.vf.meta();
                LevelSummary { level: l.n, nodes: l.grid.len(), solver: meta.solver, dx: meta.dx, dt: meta.dt, v_max: meta.v_max, tolerance: meta.tolerance }
            })
            .collect(),
        checks,
        convergence_table,
        verdicts,
        rates,
    })
}

/// The Lipschitz bound of level `l` restricted to level-`m` nodes and
/// measured in the coarser metric `delta_m >= delta_n`.
fn sup_diff_lipschitz(checks: &mut Vec<CheckResult>, base: &Level, l: &Level, to_level: &[usize], config: &HarnessConfig, two_k: f64, tolerance: f64) {
    let sources = strided(base.grid.len(), config.lipschitz_sources);
    let (quotient, excess) = lipschitz_scan(&base.grid, &l.vf, &sources, Some(to_level), two_k);
    checks.push(CheckResult {
        name: "lipschitz_restricted".into(),
        formula: format!("|u_{}(t,y) - u_{}(t,x)| <= 2K delta_{}(x,y) + tol", l.n, l.n, base.n),
        m: Some(base.n),
        n: l.n,
        bound: two_k,
        measured: quotient,
        excess,
        tolerance,
        passed: excess <= tolerance,
    });
}

fn strided(len: usize, count: usize) -> Vec<usize> {
    let stride = len.div_ceil(count.max(1)).max(1);
    (0..len).step_by(stride).collect()
}

/// Largest difference quotient and largest `|du| - two_k * delta` over
/// `sources x all nodes` of `metric_grid` and all stored times. Values are
/// read through `map` when `vf` lives on a different grid.
fn lipschitz_scan(metric_grid: &NetworkGrid, vf: &ValueFunction, sources: &[usize], map: Option<&[usize]>, two_k: f64) -> (f64, f64) {
    use rayon::prelude::*;
    let idx = |i: usize| map.map_or(i, |m| m[i]);
    sources
        .par_iter()
        .map(|&x| {
            let d = metric_grid.distances_from(x);
            let mut quotient = 0.0_f64;
            let mut excess = f64::NEG_INFINITY;
            for u in vf.values() {
                let ux = u[idx(x)];
                for (y, &dy) in d.iter().enumerate() {
                    let du = (u[idx(y)] - ux).abs();
                    excess = excess.max(du - two_k * dy);
                    if dy > 0.0 {
                        quotient = quotient.max(du / dy);
                    }
                }
            }
            (quotient, excess)
        })
        .reduce(|| (0.0, f64::NEG_INFINITY), |a, b| (a.0.max(b.0), a.1.max(b.1)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    /// Largest `u_sub - u_super`.
    pub max_excess: f64,
    /// Smallest and largest `u_super - u_sub`.
    pub min_gap: f64,
    pub max_gap: f64,
    pub tolerance: f64,
    pub holds: bool,
}

/// Checks `u_sub <= u_super + tol` at every node and time. `tol` defaults to
/// `MONOTONE_FACTOR` times the larger of the two scheme tolerances.
pub fn check_comparison_pair(sub: &ValueFunction, sup: &ValueFunction, tol: Option<f64>) -> Result<ComparisonReport, HarnessError> {
    let same_grid = Arc::ptr_eq(sub.grid(), sup.grid())
        || (sub.grid().len() == sup.grid().len() && (0..sub.grid().len()).all(|i| sub.grid().coords(i) == sup.grid().coords(i)));
    if !same_grid || sub.times() != sup.times() {
        return Err(SolverError::GridMismatch.into());
    }
    let tolerance = tol.unwrap_or(MONOTONE_FACTOR * sub.tolerance().max(sup.tolerance()));
    let (mut min_gap, mut max_gap) = (f64::INFINITY, f64::NEG_INFINITY);
    for (a, b) in sub.values().iter().zip(sup.values()) {
        for (x, y) in a.iter().zip(b) {
            min_gap = min_gap.min(y - x);
            max_gap = max_gap.max(y - x);
        }
    }
    Ok(ComparisonReport { max_excess: -min_gap, min_gap, max_gap, tolerance, holds: -min_gap <= tolerance })
}

/// Writes `report.json` and `convergence.csv` into `dir`.
pub fn emit_report(report: &StabilityReport, dir: &Path) -> Result<(), HarnessError> {
    let io = |e: std::io::Error| HarnessError::Io(e.to_string());
    fs::create_dir_all(dir).map_err(io)?;
    let json = serde_json::to_string_pretty(report).map_err(|e| HarnessError::Io(e.to_string()))?;
    fs::write(dir.join(REPORT_NAME), json + "\n").map_err(io)?;
    fs::write(dir.join(CONVERGENCE_CSV_NAME), report.convergence_csv()).map_err(io)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricGapRow {
    pub level: usize,
    /// `max |delta_n(p_n, q_n) - delta_N(p, q)|` over the sampled pairs.
    pub max_gap: f64,
}

/// Distances between sampled points of the finest level versus distances
/// between their closest points on each coarser level.
pub fn metric_convergence(seq: &ExpandingSequence, levels: &[usize], points: &[Vec<f64>]) -> Result<Vec<MetricGapRow>, HarnessError> {
    let levels = sorted_levels(levels);
    let Some(&proxy) = levels.last() else {
        return Err(HarnessError::InvalidLevels("no levels given".into()));
    };
    let oracle_at = |n: usize| -> Result<MetricOracle, HarnessError> {
        let net = seq.level(n).ok_or(HarnessError::LevelNotGenerated(n))?;
        Ok(MetricOracle::build(Arc::new(net.clone())))
    };
    let pairwise = |oracle: &MetricOracle| -> Vec<f64> {
        let located: Vec<_> = points.iter().map(|q| oracle.network().closest_point(q).0).collect();
        let mut out = Vec::new();
        for i in 0..located.len() {
            for j in i + 1..located.len() {
                out.push(oracle.distance(located[i], located[j]).expect("closest points lie on the network"));
            }
        }
        out
    };
    let reference = pairwise(&oracle_at(proxy)?);
    levels
        .iter()
        .map(|&n| {
            let d = pairwise(&oracle_at(n)?);
            let max_gap = d.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            Ok(MetricGapRow { level: n, max_gap })
        })
        .collect()
}
