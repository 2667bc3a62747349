//! Batch front end for `gribov-core`.
//!
//! Exit codes: 0 success, 1 usage or parameter error, 2 a numerical
//! certificate failed, 3 I/O error.

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gribov_core::export::{self, Table};
use gribov_core::kernel::{self, GridSpec, KernelKind};
use gribov_core::linalg::CMatrix;
use gribov_core::operator::{build_gribov_matrix, BasisRange, OperatorParams};
use gribov_core::semigroup::{self, TraceAsymptoticsRow};
use gribov_core::spectrum::{self, RealityReport, SpectrumResult};
use gribov_core::trace::{self, ContourKind, TraceDim};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const MAX_DIM_ENV: &str = "GRIBOV_MAX_DIM";
pub const DEFAULT_MAX_DIM: usize = 2048;

#[derive(Parser, Debug, Clone, Serialize)]
#[command(name = "gribov", version, about = "Spectral experiments on Gribov-Intissar operators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Lowest eigenvalues of the truncated matrix with drift certificates.
    Spectrum(SpectrumArgs),
    /// Reality and simplicity diagnostics (needs lambda' != 0, lambda != 0).
    Reality(RealityArgs),
    /// Discretized inverse kernel on its quadrature grid.
    Kernel(KernelArgs),
    /// Perron root and Hilbert-Schmidt norm of the inverse kernel.
    Radius(RadiusArgs),
    /// Eigenvector expansion of exp(-tH) applied to a basis state.
    Evolve(EvolveArgs),
    /// Short-time trace-norm expansion against the cubic Gibbs semigroup.
    SemigroupTrace(SemigroupTraceArgs),
    /// Regularized partial eigenvalue sums with contour corrections.
    RegTrace(RegTraceArgs),
    /// Long-time decay rate of the propagator norm.
    Decay(DecayArgs),
}

#[derive(Args, Debug, Clone, Copy, Serialize)]
pub struct ParamArgs {
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub mu: f64,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub lambda: f64,
    #[arg(long = "lambda-p", default_value_t = 0.0, allow_negative_numbers = true)]
    pub lambda_p: f64,
    #[arg(long = "lambda-pp", default_value_t = 0.0, allow_negative_numbers = true)]
    pub lambda_pp: f64,
}

impl ParamArgs {
    fn params(&self) -> Result<OperatorParams<f64>, CliError> {
        Ok(OperatorParams::new(self.lambda_pp, self.lambda_p, self.mu, self.lambda)?)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Output file; a `<out>.meta.json` sidecar is written next to it.
    /// Without it the payload goes to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Whitespace-separated table with a commented header instead of JSON/CSV.
    #[arg(long)]
    pub gnuplot: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value_t = 256)]
    pub dim: usize,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    /// First basis degree (0 keeps the vacuum).
    #[arg(long, default_value_t = 1)]
    pub start: usize,
    /// Largest accepted drift against the doubled truncation; drift is only
    /// reported when absent.
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct RealityArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value_t = 256)]
    pub dim: usize,
    #[arg(long, default_value_t = 1)]
    pub start: usize,
    #[arg(long, default_value_t = spectrum::REALITY_TOLERANCE)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelChoice {
    /// Semi-infinite kernel of the (mu, lambda) operator.
    MuLambda,
    /// Kernel on (0, rho') of the operator with lambda' > 0.
    LambdaPrime,
}

impl From<KernelChoice> for KernelKind {
    fn from(k: KernelChoice) -> Self {
        match k {
            KernelChoice::MuLambda => KernelKind::MuLambda,
            KernelChoice::LambdaPrime => KernelKind::LambdaPrime,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct KernelArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_enum, default_value_t = KernelChoice::MuLambda)]
    pub kind: KernelChoice,
    /// Quadrature nodes, a multiple of 16.
    #[arg(long = "n-nodes", default_value_t = 128)]
    pub n_nodes: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct RadiusArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_enum, default_value_t = KernelChoice::MuLambda)]
    pub kind: KernelChoice,
    #[arg(long = "n-nodes", default_value_t = 256)]
    pub n_nodes: usize,
    /// Relative agreement demanded between `n` and `2n` nodes.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EvolveArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 1)]
    pub start: usize,
    /// Index of the initial basis state within the truncation.
    #[arg(long, default_value_t = 0)]
    pub state: usize,
    /// Times: `a,b,c`, `start:stop:count` or `start:stop:halving`.
    #[arg(long, default_value = "0:2:11")]
    pub t: String,
    /// Largest accepted relative gap between the expansion and exp(-tH).
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SemigroupTraceArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    #[arg(long, default_value = "0.2:0.0125:halving")]
    pub t: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContourChoice {
    Midpoint,
    Alpha,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct RegTraceArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Gap indices: `5,10,15` or `start:stop:step`.
    #[arg(long, default_value = "5,10,15,20")]
    pub m: String,
    /// Exponent of the interpolated radius; selects that rule when given.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Radius rule; defaults to `alpha` when `--alpha` is set, else `midpoint`.
    #[arg(long, value_enum)]
    pub contour: Option<ContourChoice>,
    /// Fixed truncation; by default four basis states per gap index.
    #[arg(long)]
    pub dim: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DecayArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value_t = 128)]
    pub dim: usize,
    #[arg(long, default_value_t = 1)]
    pub start: usize,
    #[arg(long, default_value = "1:30:30")]
    pub t: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(gribov_core::Error),
    Io(io::Error),
}

impl From<gribov_core::Error> for CliError {
    fn from(e: gribov_core::Error) -> Self {
        match e {
            gribov_core::Error::Io(e) => CliError::Io(e),
            e => CliError::Core(e),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) if e.is_convergence_failure() => write!(f, "certificate failed: {e}"),
            CliError::Core(e) => write!(f, "invalid input: {e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_convergence_failure() => 2,
            CliError::Core(gribov_core::Error::Json(_)) => 3,
            CliError::Core(_) => 1,
            CliError::Io(_) => 3,
        }
    }
}

/// Parses `a,b,c`, `start:stop:count` (inclusive, evenly spaced) or
/// `start:stop:halving` (start, start/2, ... down to stop).
pub fn parse_times(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("cannot parse time grid `{s}`"));
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.as_slice() {
        [a, b, "halving"] => {
            let (a, b) = (num(a)?, num(b)?);
            if !(a > 0.0 && b > 0.0 && b <= a) {
                return Err(bad());
            }
            let mut out = vec![a];
            let mut t = a;
            while t / 2.0 >= b * (1.0 - 1e-12) {
                t /= 2.0;
                out.push(t);
            }
            out
        }
        [a, b, n] => {
            let (a, b) = (num(a)?, num(b)?);
            let n: usize = n.trim().parse().map_err(|_| bad())?;
            if n < 2 || !(b > a) {
                return Err(bad());
            }
            (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
        }
        [list] => list.split(',').map(num).collect::<Result<_, _>>()?,
        _ => return Err(bad()),
    };
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(bad());
    }
    Ok(grid)
}

/// Parses `5,10,15` or `start:stop:step`.
pub fn parse_indices(s: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Usage(format!("cannot parse index list `{s}`"));
    let num = |x: &str| x.trim().parse::<usize>().map_err(|_| bad());
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if step == 0 || b < a {
                return Err(bad());
            }
            Ok((a..=b).step_by(step).collect())
        }
        [list] => list.split(',').map(num).collect(),
        _ => Err(bad()),
    }
}

fn max_dim() -> Result<usize, CliError> {
    match std::env::var(MAX_DIM_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&d| d >= 2)
            .ok_or_else(|| CliError::Usage(format!("{MAX_DIM_ENV} must be an integer >= 2, got `{v}`"))),
        Err(_) => Ok(DEFAULT_MAX_DIM),
    }
}

fn check_dim(dim: usize, cap: usize) -> Result<(), CliError> {
    if dim > cap {
        return Err(CliError::Usage(format!("truncation {dim} exceeds the cap {cap} set by {MAX_DIM_ENV}")));
    }
    Ok(())
}

/// Result of one command, ready to be written.
pub struct Outcome {
    pub json: String,
    pub table: Table,
    pub summary: String,
    /// Certificates and sizes for the sidecar.
    pub details: serde_json::Value,
}

fn to_json<S: Serialize>(value: &S) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(gribov_core::Error::from)?;
    s.push('\n');
    Ok(s)
}

fn num(x: f64) -> String {
    export::format_number(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelDump {
    pub kind: KernelChoice,
    pub params: OperatorParams<f64>,
    pub nodes: Vec<f64>,
    pub quad_weights: Vec<f64>,
    /// `kernel[i][j] = K(y_i, y_j)`.
    pub kernel: Vec<Vec<f64>>,
    pub hs_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusReport {
    pub kind: KernelChoice,
    pub params: OperatorParams<f64>,
    pub n_nodes: usize,
    pub radius: f64,
    pub hs_norm: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveReport {
    pub params: OperatorParams<f64>,
    pub range: BasisRange,
    pub state: usize,
    pub t: Vec<f64>,
    /// `exp(-tH) e_state` from the eigenvector expansion, one vector per time.
    pub states: Vec<Vec<Complex64>>,
    /// Relative 2-norm gap between the expansion and the matrix exponential.
    pub expansion_error: Vec<f64>,
}

fn spectrum_cmd(a: &SpectrumArgs, cap: usize) -> Result<Outcome, CliError> {
    check_dim(a.dim, cap)?;
    let range = BasisRange::new(a.start, a.dim)?;
    let m = build_gribov_matrix(a.params.params()?, range)?;
    let res: SpectrumResult<f64> = spectrum::compute_spectrum(&m, a.count)?;
    if let Some(tol) = a.tol {
        if let Some((k, &d)) = res.drift.iter().enumerate().find(|(_, &d)| !(d <= tol)) {
            return Err(gribov_core::Error::Truncation {
                index: k,
                drift: d,
                tolerance: tol,
            }
            .into());
        }
    }
    let mut table = Table::new(["index", "re", "im", "drift"]);
    for (i, (z, d)) in res.eigenvalues.iter().zip(&res.drift).enumerate() {
        table.push(vec![i.to_string(), num(z.re), num(z.im), num(*d)]);
    }
    let table = table.with_notes([
        "eigenvalues of the truncated matrix, sorted by real part",
        "drift: distance to the nearest eigenvalue of the doubled truncation",
    ]);
    let lowest = res.lowest().map(|z| z.re).unwrap_or(f64::NAN);
    let max_drift = res.drift.iter().copied().fold(0.0, f64::max);
    Ok(Outcome {
        json: to_json(&res)?,
        table,
        summary: format!(
            "spectrum: {} eigenvalues, lowest real part {lowest:.10}, max drift {max_drift:.2e}",
            res.eigenvalues.len()
        ),
        details: serde_json::json!({ "dims_used": res.dims_used, "max_drift": max_drift }),
    })
}

fn reality_cmd(a: &RealityArgs, cap: usize) -> Result<Outcome, CliError> {
    check_dim(a.dim, cap)?;
    let range = BasisRange::new(a.start, a.dim)?;
    let rep: RealityReport<f64> = spectrum::reality_report(a.params.params()?, range, a.tol)?;
    let mut table = Table::new(["all_real", "max_imag", "delta", "converged", "min_gap"]);
    table.push(vec![
        rep.all_real.to_string(),
        num(rep.max_imag),
        num(rep.delta),
        rep.converged.to_string(),
        rep.min_gap.map(num).unwrap_or_default(),
    ]);
    Ok(Outcome {
        json: to_json(&rep)?,
        table,
        summary: format!(
            "reality: all_real={} over {} converged eigenvalues, max |Im| {:.2e}",
            rep.all_real, rep.converged, rep.max_imag
        ),
        details: serde_json::json!({ "dim": a.dim, "start": a.start, "tolerance": a.tol }),
    })
}

fn kernel_cmd(a: &KernelArgs) -> Result<Outcome, CliError> {
    let params = a.params.params()?;
    let op = kernel::discretize(a.kind.into(), &params, &GridSpec::new(a.n_nodes))?;
    let hs = kernel::hs_norm(&op);
    let dump = KernelDump {
        kind: a.kind,
        params,
        nodes: op.grid.nodes.clone(),
        quad_weights: op.grid.quad_weights.clone(),
        kernel: (0..op.len()).map(|i| op.kernel_matrix.row(i).to_vec()).collect(),
        hs_norm: hs,
    };
    Ok(Outcome {
        json: to_json(&dump)?,
        table: export::kernel_table(&op),
        summary: format!("kernel: {} nodes on ({}, {}), HS norm {hs:.12}", op.len(), op.grid.interval.0, op.grid.interval.1),
        details: serde_json::json!({ "n_nodes": op.len(), "interval": [op.grid.interval.0, op.grid.interval.1] }),
    })
}

fn radius_cmd(a: &RadiusArgs) -> Result<Outcome, CliError> {
    let params = a.params.params()?;
    let op = kernel::discretize_certified(a.kind.into(), &params, &GridSpec::new(a.n_nodes), a.tol)?;
    let root = kernel::spectral_radius(&op)?;
    let rep = RadiusReport {
        kind: a.kind,
        params,
        n_nodes: op.len(),
        radius: root.radius,
        hs_norm: kernel::hs_norm(&op),
        iterations: root.iterations,
    };
    let mut table = Table::new(["n_nodes", "radius", "hs_norm", "iterations"]);
    table.push(vec![rep.n_nodes.to_string(), num(rep.radius), num(rep.hs_norm), rep.iterations.to_string()]);
    Ok(Outcome {
        json: to_json(&rep)?,
        table,
        summary: format!("radius: {:.12} (HS norm {:.12}, {} nodes)", rep.radius, rep.hs_norm, rep.n_nodes),
        details: serde_json::json!({ "grid_tolerance": a.tol, "certified_against_nodes": a.n_nodes }),
    })
}

fn evolve_cmd(a: &EvolveArgs, cap: usize) -> Result<Outcome, CliError> {
    check_dim(a.dim, cap)?;
    let params = a.params.params()?;
    let range = BasisRange::new(a.start, a.dim)?;
    if a.state >= a.dim {
        return Err(CliError::Usage(format!("state index {} is outside the truncation {}", a.state, a.dim)));
    }
    let times = parse_times(&a.t)?;
    let m = build_gribov_matrix(params, range)?;
    let sys = spectrum::biorthogonal_system(&m, a.dim)?;
    let mut phi0 = vec![Complex64::new(0.0, 0.0); a.dim];
    phi0[a.state] = Complex64::new(1.0, 0.0);
    let mut states = Vec::with_capacity(times.len());
    let mut errors = Vec::with_capacity(times.len());
    for &t in &times {
        let u = semigroup::propagate_cauchy(&sys, &sys.eigenvalues, &phi0, t)?;
        let e: CMatrix<f64> = semigroup::matrix_exponential(&m, t)?;
        let v = e.col(a.state);
        let diff: f64 = u.iter().zip(v).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        let nrm: f64 = v.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
        let rel = diff / nrm.max(f64::MIN_POSITIVE);
        if !(rel <= a.tol) {
            return Err(gribov_core::Error::Resolution {
                quantity: "eigenvector expansion against the matrix exponential",
                change: rel,
                tolerance: a.tol,
            }
            .into());
        }
        states.push(u);
        errors.push(rel);
    }
    let mut table = Table::new(["t", "norm", "expansion_error"])
        .with_notes(["norm: ||exp(-tH) e_k||_2 from the eigenvector expansion", "expansion_error: relative gap to the matrix exponential"]);
    for ((t, u), e) in times.iter().zip(&states).zip(&errors) {
        let n: f64 = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        table.push(vec![num(*t), num(n), num(*e)]);
    }
    let worst = errors.iter().copied().fold(0.0, f64::max);
    let rep = EvolveReport {
        params,
        range,
        state: a.state,
        t: times,
        states,
        expansion_error: errors,
    };
    Ok(Outcome {
        json: to_json(&rep)?,
        table,
        summary: format!("evolve: {} times, largest expansion error {worst:.2e}", rep.t.len()),
        details: serde_json::json!({ "max_expansion_error": worst }),
    })
}

fn semigroup_trace_cmd(a: &SemigroupTraceArgs, cap: usize) -> Result<Outcome, CliError> {
    let params = a.params.params()?;
    let times = parse_times(&a.t)?;
    let rows: Vec<TraceAsymptoticsRow<f64>> = semigroup::trace_asymptotics_capped(&params, a.delta, &times, cap)?;
    let worst = rows
        .iter()
        .map(|r| r.remainder.abs() / r.bound_scale)
        .fold(0.0, f64::max);
    Ok(Outcome {
        json: to_json(&rows)?,
        table: export::trace_asymptotics_table(&rows),
        summary: format!("semigroup-trace: {} times, max |remainder| / bound_scale {worst:.4}", rows.len()),
        details: serde_json::json!({ "max_remainder_ratio": worst }),
    })
}

fn reg_trace_cmd(a: &RegTraceArgs, cap: usize) -> Result<Outcome, CliError> {
    let params = a.params.params()?;
    let ms = parse_indices(&a.m)?;
    let kind = match (a.contour, a.alpha) {
        (Some(ContourChoice::Midpoint), Some(_)) => {
            return Err(CliError::Usage("--alpha only applies to the alpha contour".into()))
        }
        (Some(ContourChoice::Midpoint), None) | (None, None) => ContourKind::MidpointGap,
        (Some(ContourChoice::Alpha), _) | (None, Some(_)) => ContourKind::AlphaInterpolated,
    };
    let dim = match a.dim {
        Some(d) => TraceDim::Fixed(d),
        None => TraceDim::Proportional(trace::DIM_PER_GAP),
    };
    for &m in &ms {
        check_dim(dim.for_gap(m), cap)?;
    }
    let rep = trace::regularized_partial_sums(&params, &ms, dim, kind, a.alpha)?;
    let last = rep.rows.last().map(|r| r.regularized_re).unwrap_or(f64::NAN);
    Ok(Outcome {
        json: to_json(&rep.rows)?,
        table: export::trace_report_table(&rep),
        summary: format!("reg-trace: {} rows, last regularized value {last:.6e}", rep.rows.len()),
        details: serde_json::json!({ "kind": rep.kind, "alpha": rep.alpha, "contours": rep.contours }),
    })
}

fn decay_cmd(a: &DecayArgs, cap: usize) -> Result<Outcome, CliError> {
    check_dim(a.dim, cap)?;
    let range = BasisRange::new(a.start, a.dim)?;
    let times = parse_times(&a.t)?;
    let rep = semigroup::decay_fit(a.params.params()?, range, &times)?;
    let mut table = Table::new(["t", "operator_norm"]).with_notes(["operator_norm: ||exp(-tH)||_2 of the truncated propagator"]);
    for &(t, n) in &rep.norms {
        table.push(vec![num(t), num(n)]);
    }
    Ok(Outcome {
        json: to_json(&rep)?,
        table,
        summary: format!(
            "decay: rate {:.10} (fit residual {:.2e})",
            rep.decay_fit.sigma0_estimate, rep.decay_fit.fit_residual
        ),
        details: serde_json::json!({ "fit_residual": rep.decay_fit.fit_residual }),
    })
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum(_) => "spectrum",
            Command::Reality(_) => "reality",
            Command::Kernel(_) => "kernel",
            Command::Radius(_) => "radius",
            Command::Evolve(_) => "evolve",
            Command::SemigroupTrace(_) => "semigroup-trace",
            Command::RegTrace(_) => "reg-trace",
            Command::Decay(_) => "decay",
        }
    }

    pub fn output(&self) -> &OutputArgs {
        match self {
            Command::Spectrum(a) => &a.output,
            Command::Reality(a) => &a.output,
            Command::Kernel(a) => &a.output,
            Command::Radius(a) => &a.output,
            Command::Evolve(a) => &a.output,
            Command::SemigroupTrace(a) => &a.output,
            Command::RegTrace(a) => &a.output,
            Command::Decay(a) => &a.output,
        }
    }

    pub fn execute(&self) -> Result<Outcome, CliError> {
        let cap = max_dim()?;
        match self {
            Command::Spectrum(a) => spectrum_cmd(a, cap),
            Command::Reality(a) => reality_cmd(a, cap),
            Command::Kernel(a) => kernel_cmd(a),
            Command::Radius(a) => radius_cmd(a),
            Command::Evolve(a) => evolve_cmd(a, cap),
            Command::SemigroupTrace(a) => semigroup_trace_cmd(a, cap),
            Command::RegTrace(a) => reg_trace_cmd(a, cap),
            Command::Decay(a) => decay_cmd(a, cap),
        }
    }
}

fn render(outcome: &Outcome, out: &OutputArgs) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    if out.gnuplot {
        outcome.table.write_gnuplot(&mut buf)?;
    } else {
        match out.format {
            Format::Json => buf.extend_from_slice(outcome.json.as_bytes()),
            Format::Csv => outcome.table.write_csv(&mut buf)?,
        }
    }
    Ok(buf)
}

/// Writes `bytes` to a temporary file in the target directory and renames it
/// over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Runs a parsed command; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match run_inner(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("gribov {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}

fn run_inner(cli: &Cli) -> Result<(), CliError> {
    let started = Instant::now();
    let outcome = cli.command.execute()?;
    let out = cli.command.output();
    let payload = render(&outcome, out)?;
    match &out.out {
        Some(path) => {
            write_atomic(path, &payload)?;
            let meta = serde_json::json!({
                "tool": "gribov",
                "version": env!("CARGO_PKG_VERSION"),
                "config": cli,
                "format": if out.gnuplot { "gnuplot" } else if out.format == Format::Csv { "csv" } else { "json" },
                "details": outcome.details,
                "elapsed_seconds": started.elapsed().as_secs_f64(),
            });
            write_atomic(&sidecar_path(path), to_json(&meta)?.as_bytes())?;
            println!("{} -> {}", outcome.summary, path.display());
        }
        None => {
            io::stdout().write_all(&payload)?;
            eprintln!("{}", outcome.summary);
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs; usage errors give 1,
/// `--help` and `--version` give 0.
pub fn main_with_args<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_grids() {
        assert_eq!(parse_times("0.2:0.0125:halving").unwrap(), vec![0.2, 0.1, 0.05, 0.025, 0.0125]);
        assert_eq!(parse_times("0:1:5").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(parse_times("0.5, 1,2").unwrap(), vec![0.5, 1.0, 2.0]);
        for bad in ["", "a", "1:2", "1:0:3", "0.1:0.2:halving", "1:2:1", "inf"] {
            assert!(parse_times(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn index_lists() {
        assert_eq!(parse_indices("5,10,15").unwrap(), vec![5, 10, 15]);
        assert_eq!(parse_indices("5:30:5").unwrap(), vec![5, 10, 15, 20, 25, 30]);
        assert!(parse_indices("5:3:1").is_err());
        assert!(parse_indices("5:10:0").is_err());
        assert!(parse_indices("x").is_err());
    }

    #[test]
    fn exit_codes_by_error_class() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 1);
        assert_eq!(CliError::Core(gribov_core::Error::InvalidParameter("x".into())).exit_code(), 1);
        assert_eq!(CliError::Core(gribov_core::Error::Singular).exit_code(), 2);
        assert_eq!(CliError::Io(io::Error::other("x")).exit_code(), 3);
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(sidecar_path(Path::new("a/b.json")), PathBuf::from("a/b.json.meta.json"));
    }
}
