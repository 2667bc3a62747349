//! Converged spectra of truncated operators.
//!
//! Every reported eigenvalue carries a certificate: its distance to the
//! nearest eigenvalue of the truncation with twice as many basis vectors.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::operator::{build_gribov_matrix, BandedComplexMatrix, BasisRange, OperatorParams};
use crate::scalar::{cr, Real};

pub const DRIFT_TOLERANCE: f64 = 1e-8;
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
pub const REALITY_TOLERANCE: f64 = 1e-8;
pub const EXCEPTIONAL_POINT_THRESHOLD: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SpectrumResult<T: Real> {
    /// Sorted by real part, then imaginary part.
    pub eigenvalues: Vec<Complex<T>>,
    pub dims_used: (usize, usize),
    /// `|sigma_k(N) - sigma_k(2N)|` with nearest-neighbour matching.
    pub drift: Vec<T>,
    /// Largest `|Im sigma_k|` over eigenvalues with drift below [`DRIFT_TOLERANCE`].
    pub max_imag: T,
}

impl<T: Real> SpectrumResult<T> {
    pub fn converged(&self, tolerance: T) -> impl Iterator<Item = Complex<T>> + '_ {
        self.eigenvalues
            .iter()
            .zip(&self.drift)
            .filter(move |(_, &d)| d < tolerance)
            .map(|(&s, _)| s)
    }

    pub fn max_imag_within(&self, tolerance: T) -> T {
        self.converged(tolerance).map(|s| s.im.abs()).fold(T::zero(), T::max)
    }

    /// Eigenvalue of least real part.
    pub fn lowest(&self) -> Option<Complex<T>> {
        lowest_real_part(&self.eigenvalues)
    }
}

/// Eigenvalue of least real part (ties broken by imaginary part), independent
/// of the order of `values`.
pub fn lowest_real_part<T: Real>(values: &[Complex<T>]) -> Option<Complex<T>> {
    values.iter().copied().reduce(|a, b| {
        if b.re < a.re || (b.re == a.re && b.im < a.im) {
            b
        } else {
            a
        }
    })
}

/// Sorted eigenvalues of the dense matrix.
pub fn all_eigenvalues<T: Real>(matrix: &BandedComplexMatrix<T>) -> Result<Vec<Complex<T>>> {
    let mut v = linalg::eigenvalues(&matrix.to_dense())?;
    linalg::sort_by_real(&mut v);
    Ok(v)
}

fn select_lowest<T: Real>(mut values: Vec<Complex<T>>, count: usize) -> Vec<Complex<T>> {
    values.sort_by(|a, b| {
        a.re.abs()
            .partial_cmp(&b.re.abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    values.truncate(count);
    linalg::sort_by_real(&mut values);
    values
}

/// The `count` eigenvalues of smallest `|Re|`, with drift against the `2N` truncation.
pub fn compute_spectrum<T: Real>(matrix: &BandedComplexMatrix<T>, count: usize) -> Result<SpectrumResult<T>> {
    let n = matrix.dim();
    if count == 0 || count > n {
        return Err(Error::InvalidParameter(format!("eigenvalue count must lie in 1..={n}, got {count}")));
    }
    let coarse = select_lowest(linalg::eigenvalues(&matrix.to_dense())?, count);
    let fine = linalg::eigenvalues(&matrix.retruncate(2 * n)?.to_dense())?;
    let drift: Vec<T> = coarse
        .iter()
        .map(|s| fine.iter().map(|f| (f - s).norm()).fold(T::infinity(), T::min))
        .collect();
    let tol = T::lit(DRIFT_TOLERANCE);
    let max_imag = coarse
        .iter()
        .zip(&drift)
        .filter(|(_, &d)| d < tol)
        .map(|(s, _)| s.im.abs())
        .fold(T::zero(), T::max);
    Ok(SpectrumResult {
        eigenvalues: coarse,
        dims_used: (n, 2 * n),
        drift,
        max_imag,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RealityReport<T: Real> {
    pub all_real: bool,
    pub max_imag: T,
    pub delta: T,
    /// Number of eigenvalues whose drift was below the tolerance.
    pub converged: usize,
    /// Smallest pairwise distance among the first ten converged eigenvalues;
    /// `None` when fewer than two converged.
    pub min_gap: Option<T>,
}

/// Reality diagnostics for the quartic-coupling operator.
///
/// Examines the lowest quarter of the truncated spectrum and keeps the
/// eigenvalues whose drift is below `tolerance`.
pub fn reality_report<T: Real>(params: OperatorParams<T>, range: BasisRange, tolerance: T) -> Result<RealityReport<T>> {
    let delta = params.delta().ok_or_else(|| {
        Error::UnsupportedRegime("reality report needs lambda != 0 and lambda' != 0".into())
    })?;
    let matrix = build_gribov_matrix(params, range)?;
    let count = (range.dim / 4).max(1);
    let spec = compute_spectrum(&matrix, count)?;
    let conv: Vec<Complex<T>> = spec.converged(tolerance).collect();
    let max_imag = conv.iter().map(|s| s.im.abs()).fold(T::zero(), T::max);
    let head = &conv[..conv.len().min(10)];
    let mut min_gap: Option<T> = None;
    for (i, a) in head.iter().enumerate() {
        for b in &head[i + 1..] {
            let d = (a - b).norm();
            min_gap = Some(min_gap.map_or(d, |g| g.min(d)));
        }
    }
    Ok(RealityReport {
        all_real: !conv.is_empty() && max_imag < tolerance,
        max_imag,
        delta,
        converged: conv.len(),
        min_gap,
    })
}

/// Least-real-part eigenvalue as a function of `mu`, all other couplings fixed.
pub fn smallest_eigenvalue_curve<T: Real>(
    template: OperatorParams<T>,
    mu_values: &[T],
    range: BasisRange,
    tolerance: T,
) -> Result<Vec<T>> {
    let count = range.dim.min(4);
    mu_values
        .iter()
        .map(|&mu| {
            if !(mu > T::zero()) {
                return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
            }
            let m = build_gribov_matrix(template.with_mu(mu), range)?;
            let spec = compute_spectrum(&m, count)?;
            let (k, s) = spec
                .eigenvalues
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.re.partial_cmp(&b.1.re).unwrap_or(std::cmp::Ordering::Equal))
                .expect("count >= 1");
            if !(spec.drift[k] < tolerance) {
                return Err(Error::Truncation {
                    index: k,
                    drift: spec.drift[k].as_f64(),
                    tolerance: tolerance.as_f64(),
                });
            }
            Ok(s.re)
        })
        .collect()
}

/// Right eigenvectors with their unconjugated self-pairings.
///
/// For a complex symmetric matrix the left eigenvector of `sigma_k` is the
/// plain transpose of the right one, so expansion coefficients use the
/// bilinear form `sum_n x_n y_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BiorthogonalSystem<T: Real> {
    pub eigenvalues: Vec<Complex<T>>,
    /// Unit 2-norm columns.
    pub right_vectors: CMatrix<T>,
    pub bilinear_norms: Vec<Complex<T>>,
}

pub fn bilinear<T: Real>(x: &[Complex<T>], y: &[Complex<T>]) -> Complex<T> {
    x.iter().zip(y).fold(cr(T::zero()), |acc, (a, b)| acc + a * b)
}

pub fn biorthogonal_system<T: Real>(matrix: &BandedComplexMatrix<T>, count: usize) -> Result<BiorthogonalSystem<T>> {
    let n = matrix.dim();
    if count == 0 || count > n {
        return Err(Error::InvalidParameter(format!("eigenvector count must lie in 1..={n}, got {count}")));
    }
    let (values, vectors) = linalg::eigen(&matrix.to_dense())?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        values[i]
            .re
            .abs()
            .partial_cmp(&values[j].re.abs())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order.truncate(count);
    order.sort_by(|&i, &j| {
        values[i]
            .re
            .partial_cmp(&values[j].re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(values[i].im.partial_cmp(&values[j].im).unwrap_or(std::cmp::Ordering::Equal))
    });
    let right = CMatrix::from_fn(n, count, |r, c| vectors[(r, order[c])]);
    let eigenvalues: Vec<Complex<T>> = order.iter().map(|&i| values[i]).collect();
    let mut norms = Vec::with_capacity(count);
    for k in 0..count {
        let col = right.col(k);
        let b = bilinear(col, col);
        if b.norm() < T::lit(EXCEPTIONAL_POINT_THRESHOLD) {
            return Err(Error::ExceptionalPoint {
                index: k,
                norm: b.norm().as_f64(),
            });
        }
        norms.push(b);
    }
    Ok(BiorthogonalSystem {
        eigenvalues,
        right_vectors: right,
        bilinear_norms: norms,
    })
}
