//! Propagators `e^{-tH}` of truncated operators and their norms.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::operator::{
    build_diagonal_power_matrix, build_gribov_matrix, cubic_eigenvalue, BandedComplexMatrix, BasisRange, DiagonalPower,
    OperatorParams,
};
use crate::scalar::{cr, Real};
use crate::spectrum::{bilinear, BiorthogonalSystem, EXCEPTIONAL_POINT_THRESHOLD};

/// Largest truncation chosen automatically.
pub const DEFAULT_MAX_DIM: usize = 2048;
/// Relative size of the discarded tail of every saturated series.
pub const SERIES_TAIL_TOL: f64 = 1e-12;

/// `e^{-tM}`.
pub fn matrix_exponential<T: Real>(matrix: &BandedComplexMatrix<T>, t: T) -> Result<CMatrix<T>> {
    if !(t >= T::zero()) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "propagator time must be finite and nonnegative, got {t}"
        )));
    }
    if t == T::zero() {
        return Ok(CMatrix::identity(matrix.dim()));
    }
    if matrix.off_diag.iter().all(|z| z.re == T::zero() && z.im == T::zero()) {
        let d: Vec<Complex<T>> = matrix.diag.iter().map(|&z| (-z.scale(t)).exp()).collect();
        return Ok(CMatrix::from_diagonal(&d));
    }
    linalg::expm(&matrix.to_dense().scale(cr(-t)))
}

/// `(sum s_k^p)^{1/p}` over singular values; `p = inf` gives the operator norm.
pub fn schatten_norm<T: Real>(matrix: &CMatrix<T>, p: T) -> Result<T> {
    if !(p >= T::one()) {
        return Err(Error::UnsupportedRegime(format!("Schatten index must be >= 1, got {p}")));
    }
    let sv = linalg::singular_values(matrix)?;
    if p.is_infinite() {
        return Ok(sv.first().copied().unwrap_or(T::zero()));
    }
    if p == T::one() {
        return Ok(sv.iter().copied().sum());
    }
    let top = sv.first().copied().unwrap_or(T::zero());
    if top == T::zero() {
        return Ok(T::zero());
    }
    let s: T = sv.iter().map(|&v| (v / top).powf(p)).sum();
    Ok(top * s.powf(T::one() / p))
}

pub fn operator_norm<T: Real>(matrix: &CMatrix<T>) -> Result<T> {
    schatten_norm(matrix, T::infinity())
}

/// `u(t) = sum_k c_k e^{-sigma_k t} phi_k` with `c_k = (phi0 . phi_k) / (phi_k . phi_k)`
/// in the unconjugated pairing.
pub fn propagate_cauchy<T: Real>(
    system: &BiorthogonalSystem<T>,
    sigma: &[Complex<T>],
    phi0: &[Complex<T>],
    t: T,
) -> Result<Vec<Complex<T>>> {
    let n = system.right_vectors.rows();
    let count = system.right_vectors.cols();
    if sigma.len() != count {
        return Err(Error::DimensionMismatch {
            expected: count,
            got: sigma.len(),
        });
    }
    if phi0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: phi0.len(),
        });
    }
    let mut u = vec![cr(T::zero()); n];
    for k in 0..count {
        let norm = system.bilinear_norms[k];
        if norm.norm() < T::lit(EXCEPTIONAL_POINT_THRESHOLD) {
            return Err(Error::ExceptionalPoint {
                index: k,
                norm: norm.norm().as_f64(),
            });
        }
        let phi = system.right_vectors.col(k);
        let c = bilinear(phi0, phi) / norm * (-sigma[k].scale(t)).exp();
        for (ui, &p) in u.iter_mut().zip(phi) {
            *ui += c * p;
        }
    }
    Ok(u)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DecayFit<T: Real> {
    pub sigma0_estimate: T,
    /// Root-mean-square residual of the straight-line fit to `ln ||e^{-tH}||`.
    pub fit_residual: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PropagatorReport<T: Real> {
    /// Last time of the grid; the norms below refer to it.
    pub t: T,
    pub operator_norm: T,
    pub schatten1: T,
    pub decay_fit: DecayFit<T>,
    /// `(t, ||e^{-tH}||)` for every grid point.
    pub norms: Vec<(T, T)>,
}

/// Least-squares slope and RMS residual of `ys` against `xs`.
fn line_fit<T: Real>(xs: &[T], ys: &[T]) -> (T, T, T) {
    let n = T::from_usize_lossy(xs.len());
    let mx = xs.iter().copied().sum::<T>() / n;
    let my = ys.iter().copied().sum::<T>() / n;
    let sxx: T = xs.iter().map(|&x| (x - mx) * (x - mx)).sum();
    let sxy: T = xs.iter().zip(ys).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let icept = my - slope * mx;
    let rss: T = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = y - (icept + slope * x);
            r * r
        })
        .sum();
    (slope, icept, (rss / n).sqrt())
}

/// Long-time decay rate of `||e^{-tH}||` from a straight-line fit of its
/// logarithm over the last third of `t_grid`.
pub fn decay_fit<T: Real>(params: OperatorParams<T>, range: BasisRange, t_grid: &[T]) -> Result<PropagatorReport<T>> {
    if !(params.mu > T::zero()) {
        return Err(Error::InvalidParameter(format!("decay fit needs mu > 0, got {}", params.mu)));
    }
    if t_grid.len() < 3 || t_grid.windows(2).any(|w| !(w[1] > w[0])) || !(t_grid[0] >= T::zero()) {
        return Err(Error::InvalidParameter("time grid must be increasing, nonnegative, with at least 3 points".into()));
    }
    let matrix = build_gribov_matrix(params, range)?;
    let mut norms = Vec::with_capacity(t_grid.len());
    let mut last = None;
    for &t in t_grid {
        let e = matrix_exponential(&matrix, t)?;
        let nrm = operator_norm(&e)?;
        if !(nrm > T::min_positive_value() / T::epsilon()) || !nrm.is_finite() {
            return Err(Error::Domain(format!("propagator norm {nrm} at t = {t} is outside the representable range")));
        }
        norms.push((t, nrm));
        last = Some(e);
    }
    let e = last.expect("nonempty grid");
    let tail = (t_grid.len() / 3).max(2);
    let (xs, ys): (Vec<T>, Vec<T>) = norms[norms.len() - tail..].iter().map(|&(t, n)| (t, n.ln())).unzip();
    let (slope, _, resid) = line_fit(&xs, &ys);
    let (t, operator_norm) = *norms.last().expect("nonempty");
    Ok(PropagatorReport {
        t,
        operator_norm,
        schatten1: schatten_norm(&e, T::one())?,
        decay_fit: DecayFit {
            sigma0_estimate: -slope,
            fit_residual: resid,
        },
        norms,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TraceAsymptoticsRow<T: Real> {
    pub t: T,
    pub lhs: T,
    pub first_order: T,
    pub remainder: T,
    pub bound_scale: T,
}

/// The two evaluations of the first-order term at one time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FirstOrderCheck<T: Real> {
    pub t: T,
    pub dim: usize,
    /// `t ||e^{-t l'' G} V||_1` from singular values.
    pub trace_norm: T,
    /// `t sum_n V_nn e^{-t l'' lambda_n}`, the trace of the same product.
    pub diagonal_series: T,
}

/// Smallest truncation (counted from `start`) whose discarded tail of
/// `term(n)` is below `SERIES_TAIL_TOL` of the retained sum.
fn saturating_dim<T: Real>(start: usize, max_dim: usize, term: impl Fn(usize) -> T) -> Result<usize> {
    let tol = T::lit(SERIES_TAIL_TOL);
    let mut sum = T::zero();
    let mut prev = T::infinity();
    for n in start.. {
        let dim = n - start + 1;
        let v = term(n);
        sum += v;
        // the terms are eventually log-concave decreasing, so once they fall
        // below tol * sum and keep falling geometrically the tail is bounded
        if n >= 3 && v <= prev && v * T::lit(1e3) <= tol * sum {
            return Ok(dim.max(2));
        }
        if dim >= max_dim {
            return Err(Error::Resolution {
                quantity: "series tail at the maximal truncation",
                change: (v / sum).as_f64(),
                tolerance: SERIES_TAIL_TOL,
            });
        }
        prev = v;
    }
    unreachable!()
}

fn check_cubic<T: Real>(params: &OperatorParams<T>) -> Result<()> {
    params.validate()?;
    if !(params.lambda_pp > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "trace asymptotics need lambda'' > 0, got {}",
            params.lambda_pp
        )));
    }
    Ok(())
}

/// Truncation that saturates every series used at time `t`.
fn trace_dim<T: Real>(params: &OperatorParams<T>, delta: T, t: T, max_dim: usize) -> Result<usize> {
    let third = t / T::lit(3.0);
    let lpp = params.lambda_pp;
    saturating_dim(1, max_dim, |n| {
        let lam = lpp * cubic_eigenvalue::<T>(n);
        let nf = T::from_usize_lossy(n);
        let weight = T::one() + params.mu.abs() * nf + lam.powf(delta) + params.lambda.abs() * nf.powf(T::lit(1.5));
        weight * (-third * lam).exp()
    })
}

/// First-order term two ways: singular values of `e^{-t l'' G} V` and the
/// diagonal series, where `V = H - l'' G`.
pub fn first_order_check<T: Real>(params: &OperatorParams<T>, t: T, max_dim: usize) -> Result<FirstOrderCheck<T>> {
    check_cubic(params)?;
    let dim = trace_dim(params, T::lit(0.5), t, max_dim)?;
    let range = BasisRange::without_vacuum(dim)?;
    let (gibbs, perturbation) = cubic_split(params, range)?;
    let e0 = matrix_exponential(&gibbs, t)?;
    let product = e0.matmul(&perturbation.to_dense());
    let series: T = (0..dim).map(|k| perturbation.diag[k].re * e0[(k, k)].re).sum();
    Ok(FirstOrderCheck {
        t,
        dim,
        trace_norm: t * schatten_norm(&product, T::one())?,
        diagonal_series: t * series,
    })
}

/// `l'' G` and `H - l'' G` on the same basis range.
fn cubic_split<T: Real>(
    params: &OperatorParams<T>,
    range: BasisRange,
) -> Result<(BandedComplexMatrix<T>, BandedComplexMatrix<T>)> {
    let g = build_diagonal_power_matrix::<T>(DiagonalPower::G, range)?;
    let gibbs = BandedComplexMatrix {
        diag: g.diag.iter().map(|z| z.scale(params.lambda_pp)).collect(),
        ..g
    };
    let perturbation = build_gribov_matrix(
        OperatorParams {
            lambda_pp: T::zero(),
            ..*params
        },
        range,
    )?;
    Ok((gibbs, perturbation))
}

/// Short-time expansion of `||e^{-tH} - e^{-t l'' G}||_1` with the
/// subordination exponent `delta >= 1/2`.
pub fn trace_asymptotics<T: Real>(params: &OperatorParams<T>, delta: T, t_grid: &[T]) -> Result<Vec<TraceAsymptoticsRow<T>>> {
    trace_asymptotics_capped(params, delta, t_grid, DEFAULT_MAX_DIM)
}

pub fn trace_asymptotics_capped<T: Real>(
    params: &OperatorParams<T>,
    delta: T,
    t_grid: &[T],
    max_dim: usize,
) -> Result<Vec<TraceAsymptoticsRow<T>>> {
    check_cubic(params)?;
    if !(delta >= T::lit(0.5)) {
        return Err(Error::InvalidParameter(format!("subordination exponent must be >= 1/2, got {delta}")));
    }
    t_grid
        .iter()
        .map(|&t| {
            if !(t > T::zero()) || !t.is_finite() {
                return Err(Error::InvalidParameter(format!("times must be positive, got {t}")));
            }
            let dim = trace_dim(params, delta, t, max_dim)?;
            let range = BasisRange::without_vacuum(dim)?;
            let (gibbs, perturbation) = cubic_split(params, range)?;
            let full = gibbs.add_scaled(&perturbation, T::one())?;
            let e = matrix_exponential(&full, t)?;
            let e0 = matrix_exponential(&gibbs, t)?;
            let lhs = schatten_norm(&e.sub(&e0), T::one())?;
            let first_order = t * schatten_norm(&e0.matmul(&perturbation.to_dense()), T::one())?;
            let third = t / T::lit(3.0);
            let bound: T = gibbs
                .diag
                .iter()
                .map(|z| {
                    let lam = z.re;
                    let p = if lam == T::zero() { T::zero() } else { lam.powf(delta) };
                    p * (-third * lam).exp()
                })
                .sum();
            Ok(TraceAsymptoticsRow {
                t,
                lhs,
                first_order,
                remainder: lhs - first_order,
                bound_scale: t * t * bound,
            })
        })
        .collect()
}

/// `||e^{-tG}||_1` with the truncation chosen to saturate the trace.
pub fn gibbs_trace_norm<T: Real>(t: T, start: usize, max_dim: usize) -> Result<T> {
    if !(t > T::zero()) {
        return Err(Error::InvalidParameter(format!("time must be positive, got {t}")));
    }
    let dim = saturating_dim(start, max_dim, |n| (-t * cubic_eigenvalue::<T>(n)).exp())?;
    let g = build_diagonal_power_matrix::<T>(DiagonalPower::G, BasisRange::new(start, dim)?)?;
    schatten_norm(&matrix_exponential(&g, t)?, T::one())
}

/// `t ||G e^{-tG}||` (operator norm) with a saturated truncation.
pub fn gibbs_scaled_sup_norm<T: Real>(t: T, start: usize, max_dim: usize) -> Result<T> {
    if !(t > T::zero()) {
        return Err(Error::InvalidParameter(format!("time must be positive, got {t}")));
    }
    let dim = saturating_dim(start, max_dim, |n| {
        let x = t * cubic_eigenvalue::<T>(n);
        (T::one() + x) * (-x).exp()
    })?;
    let g = build_diagonal_power_matrix::<T>(DiagonalPower::G, BasisRange::new(start, dim)?)?;
    let e = matrix_exponential(&g, t)?;
    Ok(t * operator_norm(&g.to_dense().matmul(&e))?)
}
