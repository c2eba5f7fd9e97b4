use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hjnet::solver::read_value_csv;
use hjnet::{EmbeddedNetwork, ExpandingSequence};

fn hjnet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hjnet")).current_dir(dir).args(args).output().expect("binary runs")
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().last().unwrap_or_default()).unwrap_or_else(|_| panic!("not JSON: {text}"))
}

const G_X: &str = r#"{"kind":"coordinate","axis":0}"#;

#[test]
fn generate_writes_levels_and_manifests() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hjnet(tmp.path(), &["generate", "--kind", "dyadic", "--depth", "3", "--out", "d/"]);
    assert_eq!(out.status.code(), Some(0));
    for n in 1..=3 {
        let net = EmbeddedNetwork::load(&tmp.path().join(format!("d/level_{n}.json"))).unwrap();
        assert_eq!(net.num_edges(), n);
    }
    let seq = ExpandingSequence::load(&tmp.path().join("d")).unwrap();
    assert_eq!(seq.level_indices(), 1..=3);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("d/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest["run_config"]["command"]["generate"]["depth"], 3);
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hjnet(tmp.path(), &["solve", "--g", G_X, "--out", "u.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--network"));
    assert_eq!(hjnet(tmp.path(), &["frobnicate"]).status.code(), Some(2));
    let out = hjnet(tmp.path(), &["--version"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("hjnet "));
}

#[test]
fn converge_on_dyadic_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(hjnet(tmp.path(), &["generate", "--kind", "dyadic", "--depth", "4", "--out", "d"]).status.success());
    let out = hjnet(tmp.path(), &["converge", "--sequence", "d", "--out", "c"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("m=1 CONVERGED"));
    let csv = fs::read_to_string(tmp.path().join("c/convergence.csv")).unwrap();
    assert!(csv.starts_with("m,n,sup_diff\n"));
    assert_eq!(csv.lines().count(), 5);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("c/report.json")).unwrap()).unwrap();
    assert_eq!(report["sequence"]["proxy_level"], 4);
    assert!(report["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));

    // Re-running into the same directory reproduces every byte.
    let before: Vec<Vec<u8>> = ["report.json", "convergence.csv", "manifest.json"].iter().map(|f| fs::read(tmp.path().join("c").join(f)).unwrap()).collect();
    assert!(hjnet(tmp.path(), &["converge", "--sequence", "d", "--out", "c"]).status.success());
    let after: Vec<Vec<u8>> = ["report.json", "convergence.csv", "manifest.json"].iter().map(|f| fs::read(tmp.path().join("c").join(f)).unwrap()).collect();
    assert_eq!(before, after);
}

#[test]
fn converge_reports_missing_levels() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(hjnet(tmp.path(), &["generate", "--kind", "dyadic", "--depth", "2", "--out", "d"]).status.success());
    let out = hjnet(tmp.path(), &["converge", "--sequence", "d", "--n", "1..5", "--out", "c"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "LevelNotGenerated");
}

#[test]
fn solve_output_round_trips_and_ignores_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(hjnet(tmp.path(), &["generate", "--kind", "sierpinski", "--depth", "1", "--out", "s"]).status.success());
    let args = |out: &'static str| vec!["solve", "--network", "s/level_1.json", "--g", G_X, "--backend", "semilagrangian", "--out", out];
    assert!(hjnet(tmp.path(), &args("a.csv")).status.success());
    let mut threaded = vec!["--threads", "1"];
    threaded.extend(args("b.csv"));
    assert!(hjnet(tmp.path(), &threaded).status.success());
    let (a, b) = (fs::read_to_string(tmp.path().join("a.csv")).unwrap(), fs::read_to_string(tmp.path().join("b.csv")).unwrap());
    assert_eq!(a, b);
    let rows = read_value_csv(&a).unwrap();
    assert!(rows.iter().all(|r| r.x.len() == 2));
    assert!(tmp.path().join("a.csv.manifest.json").exists());
}

#[test]
fn invalid_networks_surface_validation_errors() {
    let tmp = tempfile::tempdir().unwrap();
    // Two crossing diagonals of the unit square without a vertex at the crossing.
    let bad = r#"{"dim":2,"vertices":[[0,0],[1,1],[1,0],[0,1]],"edges":[[0,1],[2,3]]}"#;
    fs::write(tmp.path().join("bad.json"), bad).unwrap();
    let out = hjnet(tmp.path(), &["solve", "--network", "bad.json", "--g", G_X, "--out", "u.csv"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "ValidationError");
    assert_eq!(err["cause"], "IllegalEdgeIntersection");

    fs::write(tmp.path().join("g.json"), r#"{"kind":"nope"}"#).unwrap();
    fs::write(tmp.path().join("line.json"), r#"{"dim":1,"vertices":[[0],[1]],"edges":[[0,1]]}"#).unwrap();
    let out = hjnet(tmp.path(), &["solve", "--network", "line.json", "--g", "g.json", "--out", "u.csv"]);
    assert_eq!(stderr_json(&out)["error"], "ParseError");
}

#[test]
fn verify_and_hausdorff() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(hjnet(tmp.path(), &["generate", "--kind", "sierpinski", "--depth", "3", "--out", "s"]).status.success());
    let out = hjnet(tmp.path(), &["verify", "--sequence", "s", "--out", "v.json"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("v.json")).unwrap()).unwrap();
    assert_eq!(report["mode"], "shrinking_r");

    // The fixed-radius form fails on the gasket; that is a warning only.
    let out = hjnet(tmp.path(), &["verify", "--sequence", "s", "--mode", "fixed_r"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stderr_json(&out)["warning"], "StabilizationViolation");

    let out = hjnet(tmp.path(), &["hausdorff", "--a", "s/level_0.json", "--b", "s/level_1.json", "--h", "1e-4"]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let value = report["value"].as_f64().unwrap();
    assert!((value - 3f64.sqrt() / 8.0).abs() <= report["certified_error"].as_f64().unwrap());

    let out = hjnet(tmp.path(), &["hausdorff", "--sequence", "s", "--out", "t.csv"]);
    assert!(out.status.success());
    assert!(fs::read_to_string(tmp.path().join("t.csv")).unwrap().starts_with("n,d_H,certificate\n0,"));
    assert_eq!(hjnet(tmp.path(), &["hausdorff", "--a", "s/level_0.json"]).status.code(), Some(2));

    let out = hjnet(tmp.path(), &["generate", "--kind", "sierpinski", "--depth", "1", "--corners", "0,0,2,0,0,2", "--out", "t"]);
    assert!(out.status.success());
    assert_eq!(EmbeddedNetwork::load(&tmp.path().join("t/level_0.json")).unwrap().total_length(), 4.0 + 8f64.sqrt());
    let out = hjnet(tmp.path(), &["generate", "--kind", "sierpinski", "--depth", "1", "--corners", "0,0,1,1,2,2", "--out", "u"]);
    assert_eq!(stderr_json(&out)["error"], "CollinearCorners");
}

#[test]
fn residual_writes_csv() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(hjnet(tmp.path(), &["generate", "--kind", "dyadic", "--depth", "2", "--out", "d"]).status.success());
    let out = hjnet(tmp.path(), &["residual", "--network", "d/level_2.json", "--g", G_X, "--window", "0.1,0.4", "--out", "r.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(tmp.path().join("r.csv")).unwrap().starts_with("edge,s,t,residual\n"));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(summary["entries"].as_u64().unwrap() > 0);
}
