use std::path::Path;
use std::process::{Command, Output};

use gribov_cli::{EvolveReport, KernelDump, RadiusReport};
use gribov_core::semigroup::{PropagatorReport, TraceAsymptoticsRow};
use gribov_core::spectrum::{RealityReport, SpectrumResult};
use gribov_core::trace::TraceRow;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn gribov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gribov"))
        .args(args)
        .env_remove("GRIBOV_MAX_DIM")
        .output()
        .expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    gribov(args).status.code().expect("exit code")
}

fn run_to(dir: &Path, name: &str, args: &[&str]) -> String {
    let path = dir.join(name);
    let mut full: Vec<&str> = args.to_vec();
    let p = path.to_str().unwrap().to_string();
    full.push("--out");
    full.push(&p);
    let out = gribov(&full);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = String::from_utf8(out.stdout).unwrap();
    assert_eq!(summary.lines().count(), 1, "one-line summary: {summary}");
    std::fs::read_to_string(path).unwrap()
}

/// Parses into `T` and checks that re-serialising reproduces the file.
fn round_trip<T: DeserializeOwned + Serialize>(json: &str) -> T {
    let v: T = serde_json::from_str(json).expect("payload parses into its type");
    let again = serde_json::to_string_pretty(&v).unwrap() + "\n";
    assert_eq!(again, json);
    v
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&["bogus"]), 1);
    assert_eq!(code(&["spectrum", "--no-such-flag"]), 1);
    assert_eq!(code(&["spectrum", "--dim", "many"]), 1);
    assert_eq!(code(&["semigroup-trace", "--lambda-pp", "1", "--t", "0.1:0.2:halving"]), 1);
    assert_eq!(code(&["spectrum", "--mu", "inf"]), 1);
    assert_eq!(code(&["reality"]), 1);
    assert_eq!(code(&["reg-trace", "--lambda-pp", "1", "--m", "2"]), 1);
    assert_eq!(code(&[]), 1);
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&["reg-trace", "--help"]), 0);
}

#[test]
fn failed_certificate_exits_two() {
    let out = gribov(&["spectrum", "--dim", "32", "--count", "10", "--tol", "1e-14"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("certificate failed"));
    assert_eq!(code(&["radius", "--n-nodes", "32", "--lambda", "1", "--tol", "1e-14"]), 2);
}

#[test]
fn io_failure_exits_three() {
    assert_eq!(code(&["spectrum", "--dim", "16", "--count", "2", "--out", "/nonexistent-dir/x.json"]), 3);
}

#[test]
fn dimension_cap_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_gribov"))
        .args(["spectrum", "--dim", "64", "--count", "2"])
        .env("GRIBOV_MAX_DIM", "32")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = Command::new(env!("CARGO_BIN_EXE_gribov"))
        .args(["spectrum", "--dim", "32", "--count", "2"])
        .env("GRIBOV_MAX_DIM", "32")
        .output()
        .unwrap();
    assert!(out.status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_gribov"))
        .args(["spectrum", "--dim", "32", "--count", "2"])
        .env("GRIBOV_MAX_DIM", "lots")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn identical_runs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["reg-trace", "--lambda-pp", "1", "--m", "5,10", "--alpha", "0.15"];
    let a = run_to(dir.path(), "a.json", &args);
    let b = run_to(dir.path(), "b.json", &args);
    assert_eq!(a, b);
    let args = ["semigroup-trace", "--lambda-pp", "1", "--t", "0.1:0.025:halving", "--format", "csv"];
    assert_eq!(run_to(dir.path(), "a.csv", &args), run_to(dir.path(), "b.csv", &args));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["command"]["command"], "semigroup-trace");
    assert_eq!(meta["format"], "csv");
    let leftovers: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with(".tmp"))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}

#[test]
fn json_payloads_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let s: SpectrumResult<f64> = round_trip(&run_to(d, "s.json", &["spectrum", "--dim", "64", "--count", "5"]));
    assert_eq!(s.eigenvalues.len(), 5);
    assert_eq!(s.dims_used, (64, 128));

    let r: RealityReport<f64> = round_trip(&run_to(d, "r.json", &["reality", "--lambda-p", "0.2", "--dim", "64"]));
    assert!(r.all_real);

    let k: KernelDump = round_trip(&run_to(d, "k.json", &["kernel", "--n-nodes", "32"]));
    assert_eq!(k.kernel.len(), 32);

    let rad: RadiusReport = round_trip(&run_to(d, "rad.json", &["radius", "--lambda", "1", "--n-nodes", "256"]));
    assert!((rad.radius - 0.548016294368).abs() < 1e-10);

    let e: EvolveReport = round_trip(&run_to(d, "e.json", &["evolve", "--dim", "16", "--t", "0,0.5"]));
    assert_eq!(e.states.len(), 2);

    let rows: Vec<TraceAsymptoticsRow<f64>> =
        round_trip(&run_to(d, "st.json", &["semigroup-trace", "--lambda-pp", "1", "--t", "0.1,0.05"]));
    assert_eq!(rows.len(), 2);

    let tr: Vec<TraceRow<f64>> = round_trip(&run_to(d, "rt.json", &["reg-trace", "--lambda-pp", "1", "--m", "5,10"]));
    assert_eq!(tr.iter().map(|r| r.m).collect::<Vec<_>>(), vec![5, 10]);

    let p: PropagatorReport<f64> = round_trip(&run_to(d, "d.json", &["decay", "--dim", "32", "--t", "1:10:10"]));
    assert_eq!(p.norms.len(), 10);
}

#[test]
fn trace_report_json_schema() {
    let dir = tempfile::tempdir().unwrap();
    let json = run_to(dir.path(), "rt.json", &["reg-trace", "--lambda-pp", "1", "--m", "5"]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let row = v.as_array().unwrap()[0].as_object().unwrap();
    let mut keys: Vec<&str> = row.keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(keys, ["corrections", "m", "radius", "raw_sum", "regularized_im", "regularized_re"]);
    let c = row["corrections"].as_array().unwrap();
    assert_eq!(c.len(), 4);
    assert!(c.iter().all(|p| p.as_array().unwrap().len() == 2));
}

#[test]
fn csv_dialect_and_precision() {
    let dir = tempfile::tempdir().unwrap();
    let csv = run_to(
        dir.path(),
        "st.csv",
        &["semigroup-trace", "--lambda-pp", "1", "--t", "0.2:0.0125:halving", "--format", "csv"],
    );
    assert!(!csv.contains('\r') && !csv.contains('"'));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,lhs,first_order,remainder,bound_scale"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[4][0], 0.0125);
    for r in &rows {
        assert_eq!(r.len(), 5);
        assert!((r[3] - (r[1] - r[2])).abs() <= 1e-15 * r[1].abs().max(1.0));
    }
    let first = csv.lines().nth(1).unwrap().split(',').next().unwrap();
    let mantissa = first.split('e').next().unwrap();
    assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
}

#[test]
fn kernel_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let csv = run_to(dir.path(), "k.csv", &["kernel", "--n-nodes", "32", "--format", "csv"]);
    let rows: Vec<Vec<f64>> = csv.lines().map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 33);
    assert!(rows.iter().all(|r| r.len() == 32));
    assert!(rows[0].windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn gnuplot_output_has_commented_header() {
    let dir = tempfile::tempdir().unwrap();
    let g = run_to(dir.path(), "st.dat", &["semigroup-trace", "--lambda-pp", "1", "--t", "0.1,0.05", "--gnuplot"]);
    let comments: Vec<&str> = g.lines().take_while(|l| l.starts_with('#')).collect();
    assert!(comments.iter().any(|l| l.contains("bound_scale")));
    let data: Vec<&str> = g.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), 2);
    assert_eq!(data[0].split_whitespace().count(), 5);
}

#[test]
fn payload_goes_to_stdout_without_out() {
    let out = gribov(&["spectrum", "--dim", "16", "--count", "3", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("spectrum:"));
}
