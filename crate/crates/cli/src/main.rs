//! `hjnet`: generate expanding networks, solve Hamilton-Jacobi equations on
//! them and check convergence across levels. Every run is driven by flags
//! only and writes a manifest echoing its configuration next to its outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use hjnet::generators::{expansion_report, DEFAULT_CORNERS};
use hjnet::harness::{emit_report, run_stability, HarnessConfig};
use hjnet::hausdorff::{check_hausdorff_convergence, default_step};
use hjnet::slope::pde_residual;
use hjnet::solver::{default_dx, uniform_times, DEFAULT_TIME_DIVISIONS};
use hjnet::{
    hausdorff_distance, restrict_initial, solve, verify_expanding, Backend, EmbeddedNetwork, ExpandingSequence, GeneratorError, MetricOracle,
    NetworkError, NetworkGrid, ScalarFieldSpec, SolveConfig, StabilizationMode,
};

const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Parser, Serialize)]
#[command(name = "hjnet", version, about = "Hamilton-Jacobi equations on expanding networks")]
struct Cli {
    /// Cap on worker threads (results do not depend on it).
    #[arg(long, global = true)]
    #[serde(skip)]
    threads: Option<usize>,
    /// Multiplies every default tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    tol_scale: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
enum Command {
    /// Write the levels of a dyadic or Sierpiński sequence plus a sequence manifest.
    Generate(GenerateArgs),
    /// Solve on one network and write the value function as CSV.
    Solve(SolveArgs),
    /// Hausdorff distance between two networks, or the convergence table of a sequence.
    Hausdorff(HausdorffArgs),
    /// PDE residual of a computed solution at edge-interior nodes.
    Residual(ResidualArgs),
    /// Level-by-level solves with the stability checks and convergence table.
    Converge(ConvergeArgs),
    /// Check nesting and local stabilization of a sequence.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Kind {
    Dyadic,
    Sierpinski,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum BackendArg {
    Hopflax,
    Semilagrangian,
    Auto,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Hopflax => Backend::HopfLax,
            BackendArg::Semilagrangian => Backend::SemiLagrangian,
            BackendArg::Auto => Backend::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
enum ModeArg {
    #[value(name = "fixed_r")]
    #[serde(rename = "fixed_r")]
    FixedR,
    #[value(name = "shrinking_r")]
    #[serde(rename = "shrinking_r")]
    ShrinkingR,
}

#[derive(Debug, Args, Serialize)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    depth: usize,
    /// Sierpiński corners as `x1,y1,x2,y2,x3,y3`.
    #[arg(long, value_parser = parse_corners)]
    corners: Option<[[f64; 2]; 3]>,
    #[arg(long)]
    out: PathBuf,
}

/// Field and solver options shared by `solve` and `residual`.
#[derive(Debug, Args, Serialize)]
struct FieldArgs {
    /// Initial datum: inline JSON or a path to a JSON file.
    #[arg(long)]
    g: String,
    /// Potential: inline JSON or a path; defaults to zero.
    #[arg(long = "V")]
    #[serde(rename = "V")]
    v: Option<String>,
    #[arg(long = "T", default_value_t = 0.5)]
    #[serde(rename = "T")]
    t: f64,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    dx: Option<f64>,
    #[arg(long, value_enum, default_value_t = BackendArg::Auto)]
    backend: BackendArg,
    /// Number of equal time intervals in the stored ladder.
    #[arg(long, default_value_t = DEFAULT_TIME_DIVISIONS)]
    time_divisions: usize,
}

#[derive(Debug, Args, Serialize)]
struct SolveArgs {
    #[arg(long)]
    network: PathBuf,
    #[command(flatten)]
    field: FieldArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("input").required(true).args(["a", "sequence"])))]
struct HausdorffArgs {
    #[arg(long, requires = "b")]
    a: Option<PathBuf>,
    #[arg(long, requires = "a")]
    b: Option<PathBuf>,
    /// Sequence directory or manifest; reports `d_H(N^n, N^N)` for every level.
    #[arg(long, conflicts_with_all = ["a", "b"])]
    sequence: Option<PathBuf>,
    /// Sampling step; defaults to 1e-3 times the diameter.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ResidualArgs {
    #[arg(long)]
    network: PathBuf,
    #[command(flatten)]
    field: FieldArgs,
    /// Time window `a,b` of the residual.
    #[arg(long, value_parser = parse_window, default_value = "0.1,0.4")]
    window: (f64, f64),
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ConvergeArgs {
    #[arg(long)]
    sequence: PathBuf,
    /// Initial datum; defaults to the first coordinate.
    #[arg(long)]
    g: Option<String>,
    #[arg(long = "V")]
    #[serde(rename = "V")]
    v: Option<String>,
    #[arg(long = "T", default_value_t = 0.5)]
    #[serde(rename = "T")]
    t: f64,
    /// Levels `m`, e.g. `1,2` or `1..3`; defaults to the smallest `n`.
    #[arg(long)]
    m: Option<String>,
    /// Levels `n`; defaults to every level of the sequence.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    dx: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, value_enum, default_value_t = BackendArg::Auto)]
    backend: BackendArg,
    #[arg(long, default_value_t = DEFAULT_TIME_DIVISIONS)]
    time_divisions: usize,
    #[arg(long)]
    tol_conv: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct VerifyArgs {
    #[arg(long)]
    sequence: PathBuf,
    /// Defaults to `shrinking_r` for Sierpiński sequences and `fixed_r` otherwise.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure reported as JSON on stderr with exit code 1.
struct Failure {
    kind: String,
    message: String,
    cause: Option<String>,
}

impl Failure {
    fn new(kind: impl Into<String>, message: impl ToString) -> Self {
        Failure { kind: kind.into(), message: message.to_string(), cause: None }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Failure::new("IoError", format!("{}: {e}", path.display()))
    }
}

macro_rules! impl_failure {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::new(e.kind(), &e)
            }
        }
    )*};
}

impl_failure!(hjnet::FieldError, hjnet::SolverError, hjnet::HarnessError, hjnet::hausdorff::HausdorffError, hjnet::slope::SlopeError, hjnet::grid::GridError);

impl From<NetworkError> for Failure {
    fn from(e: NetworkError) -> Self {
        match e {
            NetworkError::Io(_) | NetworkError::Parse(_) => Failure::new(e.kind(), &e),
            _ => Failure { kind: "ValidationError".into(), message: e.to_string(), cause: Some(e.kind().into()) },
        }
    }
}

impl From<GeneratorError> for Failure {
    fn from(e: GeneratorError) -> Self {
        Failure { kind: e.kind().into(), message: e.to_string(), cause: e.cause().map(Into::into) }
    }
}

type CliResult = Result<(), Failure>;

fn parse_numbers(text: &str, count: usize) -> Result<Vec<f64>, String> {
    let values: Vec<f64> = text.split(',').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    if values.len() != count {
        return Err(format!("expected {count} comma-separated numbers, got {}", values.len()));
    }
    Ok(values)
}

fn parse_corners(text: &str) -> Result<[[f64; 2]; 3], String> {
    let c = parse_numbers(text, 6)?;
    Ok([[c[0], c[1]], [c[2], c[3]], [c[4], c[5]]])
}

fn parse_window(text: &str) -> Result<(f64, f64), String> {
    let w = parse_numbers(text, 2)?;
    Ok((w[0], w[1]))
}

fn parse_field(text: &str) -> Result<ScalarFieldSpec, Failure> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        return Ok(ScalarFieldSpec::from_json(trimmed)?);
    }
    let path = Path::new(text);
    let body = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    Ok(ScalarFieldSpec::from_json(&body)?)
}

fn zero_or(text: Option<&str>) -> Result<ScalarFieldSpec, Failure> {
    text.map_or(Ok(ScalarFieldSpec::constant(0.0)), parse_field)
}

/// `1,2`, `1..6` (inclusive) or a mix such as `1..3,5`.
fn parse_levels(text: &str) -> Result<Vec<usize>, Failure> {
    let bad = || Failure::new("InvalidLevels", format!("cannot parse level list {text:?}"));
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once("..") {
            Some((a, b)) => {
                let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().trim_start_matches('=').parse().map_err(|_| bad())?);
                if b < a {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

fn write(path: &Path, text: &str) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Failure::io(path, e))
}

fn pretty(value: &impl Serialize) -> String {
    serde_json::to_string_pretty(value).expect("output types serialize") + "\n"
}

fn manifest(cli: &Cli, extra: serde_json::Value) -> String {
    let mut m = json!({
        "tool": "hjnet",
        "version": env!("CARGO_PKG_VERSION"),
        "run_config": cli,
    });
    if let serde_json::Value::Object(extra) = extra {
        m.as_object_mut().expect("object").extend(extra);
    }
    pretty(&m)
}

fn manifest_beside(file: &Path) -> PathBuf {
    let mut name = file.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    file.with_file_name(name)
}

fn load_network(path: &Path) -> Result<Arc<EmbeddedNetwork>, Failure> {
    Ok(Arc::new(EmbeddedNetwork::load(path)?))
}

fn generate(cli: &Cli, args: &GenerateArgs) -> CliResult {
    let seq = match args.kind {
        Kind::Dyadic => ExpandingSequence::dyadic(args.depth)?,
        Kind::Sierpinski => {
            ExpandingSequence::sierpinski(args.depth, args.corners.unwrap_or(DEFAULT_CORNERS))?
        }
    };
    seq.save(&args.out)?;
    write(&args.out.join(MANIFEST_NAME), &manifest(cli, json!({ "levels": seq.level_indices().collect::<Vec<_>>() })))?;
    println!("wrote levels {}..={} to {}", seq.first_level, seq.last_level(), args.out.display());
    Ok(())
}

fn solve_on(network: &Path, field: &FieldArgs, tol_scale: f64) -> Result<(hjnet::ValueFunction, f64), Failure> {
    let net = load_network(network)?;
    let dx = field.dx.unwrap_or_else(|| default_dx(&net));
    let grid = Arc::new(NetworkGrid::build(Arc::new(MetricOracle::build(net)), dx)?);
    let g = parse_field(&field.g)?;
    let v = zero_or(field.v.as_deref())?;
    let config = SolveConfig {
        backend: field.backend.into(),
        horizon: field.t,
        dt: field.dt,
        v_max: None,
        times: Some(uniform_times(field.t, field.time_divisions.max(1))),
    };
    let mut vf = solve(grid, &g, &v, &config)?;
    let mut meta = vf.meta().clone();
    meta.tolerance *= tol_scale;
    vf = hjnet::ValueFunction::new(vf.grid().clone(), vf.times().to_vec(), vf.values().to_vec(), meta);
    Ok((vf, dx))
}

fn solve_cmd(cli: &Cli, args: &SolveArgs) -> CliResult {
    let (vf, dx) = solve_on(&args.network, &args.field, cli.tol_scale)?;
    write(&args.out, &vf.to_csv())?;
    write(&manifest_beside(&args.out), &manifest(cli, json!({ "grid_dx": dx, "solver": vf.meta() })))?;
    println!("{}", serde_json::to_string(vf.meta()).expect("meta serializes"));
    Ok(())
}

fn hausdorff_cmd(cli: &Cli, args: &HausdorffArgs) -> CliResult {
    let text = if let Some(seq_path) = &args.sequence {
        let seq = ExpandingSequence::load(seq_path)?;
        let h = args.h.unwrap_or_else(|| default_step(seq.finest()));
        check_hausdorff_convergence(&seq.levels, seq.first_level, h)?.to_csv()
    } else {
        let (a, b) = (load_network(args.a.as_deref().expect("clap group"))?, load_network(args.b.as_deref().expect("clap requires"))?);
        let h = args.h.unwrap_or_else(|| default_step(&a).min(default_step(&b)));
        pretty(&hausdorff_distance(&a, &b, h)?)
    };
    match &args.out {
        Some(out) => {
            write(out, &text)?;
            write(&manifest_beside(out), &manifest(cli, json!({})))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn residual_cmd(cli: &Cli, args: &ResidualArgs) -> CliResult {
    let (vf, dx) = solve_on(&args.network, &args.field, cli.tol_scale)?;
    let v = restrict_initial(&zero_or(args.field.v.as_deref())?, vf.grid().oracle().clone())?;
    let report = pde_residual(&vf, &v, args.window)?;
    write(&args.out, &report.to_csv())?;
    let summary = json!({ "max": report.max, "mean": report.mean, "entries": report.entries.len() });
    write(&manifest_beside(&args.out), &manifest(cli, json!({ "grid_dx": dx, "solver": vf.meta(), "summary": summary })))?;
    println!("{summary}");
    Ok(())
}

fn default_mode(seq: &ExpandingSequence) -> StabilizationMode {
    match seq.kind {
        hjnet::generators::SequenceKind::Sierpinski => StabilizationMode::ShrinkingR,
        _ => StabilizationMode::FixedR,
    }
}

fn warn(kind: &str, message: impl std::fmt::Display) {
    eprintln!("{}", json!({ "warning": kind, "message": message.to_string() }));
}

fn converge_cmd(cli: &Cli, args: &ConvergeArgs) -> CliResult {
    let seq = ExpandingSequence::load(&args.sequence)?;
    if seq.levels.len() >= 2 {
        if let Err(e) = verify_expanding(&seq, default_mode(&seq)) {
            warn(e.kind(), &e);
        }
    }
    let g = args.g.as_deref().map_or(Ok(ScalarFieldSpec::coordinate(0)), parse_field)?;
    let v = zero_or(args.v.as_deref())?;
    let n_levels = match &args.n {
        Some(text) => parse_levels(text)?,
        None => seq.level_indices().collect(),
    };
    let m_levels = match &args.m {
        Some(text) => parse_levels(text)?,
        None => vec![*n_levels.iter().min().expect("non-empty")],
    };
    let config = HarnessConfig {
        backend: args.backend.into(),
        dx: args.dx,
        dt: args.dt,
        time_divisions: args.time_divisions.max(1),
        tol_scale: cli.tol_scale,
        tol_conv: args.tol_conv,
        ..HarnessConfig::new(args.t)
    };
    let report = run_stability(&seq, &g, &v, &config, &m_levels, &n_levels)?;
    emit_report(&report, &args.out)?;
    write(&args.out.join(MANIFEST_NAME), &manifest(cli, json!({})))?;
    for v in &report.verdicts {
        let state = if v.converged { "CONVERGED" } else { "NOT CONVERGED" };
        println!("m={} {state} (to proxy u_{}): last sup diff {:e}, tol_conv {:e}", v.m, report.sequence.proxy_level, v.last_entry, v.tol_conv);
    }
    let failed: Vec<String> = report.checks.iter().filter(|c| !c.passed).map(|c| format!("{} (n={})", c.name, c.n)).collect();
    let unconverged: Vec<usize> = report.verdicts.iter().filter(|v| !v.converged).map(|v| v.m).collect();
    if !failed.is_empty() || !unconverged.is_empty() {
        return Err(Failure::new("CheckFailed", format!("failed checks: {failed:?}; not converged for m in {unconverged:?}")));
    }
    Ok(())
}

fn verify_cmd(cli: &Cli, args: &VerifyArgs) -> CliResult {
    let seq = ExpandingSequence::load(&args.sequence)?;
    let mode = match args.mode {
        Some(ModeArg::FixedR) => StabilizationMode::FixedR,
        Some(ModeArg::ShrinkingR) => StabilizationMode::ShrinkingR,
        None => default_mode(&seq),
    };
    let report = expansion_report(&seq, mode)?;
    let text = pretty(&report);
    match &args.out {
        Some(out) => {
            write(out, &text)?;
            write(&manifest_beside(out), &manifest(cli, json!({})))?;
        }
        None => print!("{text}"),
    }
    match verify_expanding(&seq, mode) {
        Ok(_) => Ok(()),
        Err(e @ GeneratorError::StabilizationViolation { .. }) => {
            warn(e.kind(), &e);
            Ok(())
        }
        Err(e) => Err(e.into()),
    }
}

fn run(cli: &Cli) -> CliResult {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global().map_err(|e| Failure::new("ThreadPool", e))?;
    }
    match &cli.command {
        Command::Generate(a) => generate(cli, a),
        Command::Solve(a) => solve_cmd(cli, a),
        Command::Hausdorff(a) => hausdorff_cmd(cli, a),
        Command::Residual(a) => residual_cmd(cli, a),
        Command::Converge(a) => converge_cmd(cli, a),
        Command::Verify(a) => verify_cmd(cli, a),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let mut err = json!({ "error": f.kind, "message": f.message });
            if let Some(cause) = f.cause {
                err["cause"] = json!(cause);
            }
            eprintln!("{err}");
            ExitCode::from(1)
        }
    }
}
