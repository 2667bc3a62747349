//! Truncations of the Bargmann-space operators in the monomial basis
//! `e_n = z^n / sqrt(n!)`.
//!
//! The full operator is
//! `H = l'' A*^3 A^3 + l' A*^2 A^2 + mu A*A + i lambda A*(A + A*)A`,
//! which is tridiagonal and complex symmetric in this basis.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::{cr, Real};

/// The four real couplings `(lambda'', lambda', mu, lambda)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct OperatorParams<T: Real> {
    pub lambda_pp: T,
    pub lambda_p: T,
    pub mu: T,
    pub lambda: T,
}

impl<T: Real> OperatorParams<T> {
    pub fn new(lambda_pp: T, lambda_p: T, mu: T, lambda: T) -> Result<Self> {
        let p = Self {
            lambda_pp,
            lambda_p,
            mu,
            lambda,
        };
        p.validate()?;
        Ok(p)
    }

    /// The `mu A*A + i lambda A*(A + A*)A` part only.
    pub fn mu_lambda(mu: T, lambda: T) -> Result<Self> {
        Self::new(T::zero(), T::zero(), mu, lambda)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("lambda_pp", self.lambda_pp),
            ("lambda_p", self.lambda_p),
            ("mu", self.mu),
            ("lambda", self.lambda),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(())
    }

    /// `mu / lambda`, defined for `lambda != 0`.
    pub fn rho(&self) -> Option<T> {
        (self.lambda != T::zero()).then(|| self.mu / self.lambda)
    }

    /// `lambda / lambda'`, defined for `lambda' != 0`.
    pub fn rho_prime(&self) -> Option<T> {
        (self.lambda_p != T::zero()).then(|| self.lambda / self.lambda_p)
    }

    /// `rho' (rho + rho') - 1`.
    pub fn delta(&self) -> Option<T> {
        let r = self.rho()?;
        let rp = self.rho_prime()?;
        Some(rp * (r + rp) - T::one())
    }

    /// Same couplings with `lambda'' = 0`.
    pub fn without_cubic(&self) -> Self {
        Self {
            lambda_pp: T::zero(),
            ..*self
        }
    }

    pub fn with_mu(&self, mu: T) -> Self {
        Self { mu, ..*self }
    }

    pub fn with_lambda(&self, lambda: T) -> Self {
        Self { lambda, ..*self }
    }

    pub fn with_lambda_p(&self, lambda_p: T) -> Self {
        Self { lambda_p, ..*self }
    }
}

/// Basis degrees kept by a truncation: `start, start + 1, ..., start + dim - 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisRange {
    pub start: usize,
    pub dim: usize,
}

impl BasisRange {
    pub fn new(start: usize, dim: usize) -> Result<Self> {
        if start > 1 {
            return Err(Error::InvalidParameter(format!("basis start must be 0 or 1, got {start}")));
        }
        if dim < 2 {
            return Err(Error::InvalidParameter(format!("truncation size must be at least 2, got {dim}")));
        }
        Ok(Self { start, dim })
    }

    /// Vacuum removed (`start = 1`), the default.
    pub fn without_vacuum(dim: usize) -> Result<Self> {
        Self::new(1, dim)
    }

    pub fn with_vacuum(dim: usize) -> Result<Self> {
        Self::new(0, dim)
    }

    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        Self::new(self.start, dim)
    }

    pub fn degrees(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.dim
    }

    pub fn degree(&self, index: usize) -> usize {
        self.start + index
    }
}

/// Diagonal powers of the number operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagonalPower {
    /// `A*A`, entries `n`.
    N,
    /// `A*^2 A^2`, entries `n(n-1)`.
    S,
    /// `A*^3 A^3`, entries `n(n-1)(n-2)`.
    G,
}

impl DiagonalPower {
    pub fn value(self, n: usize) -> u128 {
        let n = n as u128;
        match self {
            DiagonalPower::N => n,
            DiagonalPower::S => n * n.saturating_sub(1),
            DiagonalPower::G => n * n.saturating_sub(1) * n.saturating_sub(2),
        }
    }
}

/// `n(n-1)(n-2)` as an exact integer, then rounded once.
pub fn cubic_eigenvalue<T: Real>(n: usize) -> T {
    T::from_u128(DiagonalPower::G.value(n)).expect("representable")
}

/// What a banded matrix truncates, kept so it can be rebuilt at another size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub enum OperatorSource<T: Real> {
    Gribov(OperatorParams<T>),
    DiagonalPower(DiagonalPower),
    DisplacedOscillator { omega: T, coupling: T },
}

/// Symmetric tridiagonal truncation stored as its diagonal and off-diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BandedComplexMatrix<T: Real> {
    pub range: BasisRange,
    pub diag: Vec<Complex<T>>,
    /// Entries `(i, i+1)`; the subdiagonal is identical.
    pub off_diag: Vec<Complex<T>>,
    pub bandwidth: usize,
    pub source: OperatorSource<T>,
}

/// Truncation of `H` to the degrees in `range`.
pub fn build_gribov_matrix<T: Real>(params: OperatorParams<T>, range: BasisRange) -> Result<BandedComplexMatrix<T>> {
    params.validate()?;
    let range = BasisRange::new(range.start, range.dim)?;
    let deg = |k: usize| T::from_u128(k as u128).expect("representable");
    let diag = range
        .degrees()
        .map(|n| {
            let g = T::from_u128(DiagonalPower::G.value(n)).expect("representable");
            let s = T::from_u128(DiagonalPower::S.value(n)).expect("representable");
            cr(params.lambda_pp * g + params.lambda_p * s + params.mu * deg(n))
        })
        .collect();
    let off_diag = range
        .degrees()
        .take(range.dim - 1)
        .map(|n| {
            let m = n as u128;
            let root = T::from_u128(m * m * (m + 1)).expect("representable").sqrt();
            Complex::new(T::zero(), params.lambda * root)
        })
        .collect();
    Ok(BandedComplexMatrix {
        range,
        diag,
        off_diag,
        bandwidth: 1,
        source: OperatorSource::Gribov(params),
    })
}

/// Diagonal truncation of `A*A`, `A*^2 A^2` or `A*^3 A^3`.
pub fn build_diagonal_power_matrix<T: Real>(kind: DiagonalPower, range: BasisRange) -> Result<BandedComplexMatrix<T>> {
    let range = BasisRange::new(range.start, range.dim)?;
    Ok(BandedComplexMatrix {
        range,
        diag: range
            .degrees()
            .map(|n| cr(T::from_u128(kind.value(n)).expect("representable")))
            .collect(),
        off_diag: vec![cr(T::zero()); range.dim - 1],
        bandwidth: 0,
        source: OperatorSource::DiagonalPower(kind),
    })
}

/// `omega A*A + coupling (A + A*)`, whose spectrum is `n omega - coupling^2 / omega`.
pub fn build_displaced_oscillator<T: Real>(omega: T, coupling: T, range: BasisRange) -> Result<BandedComplexMatrix<T>> {
    if !(omega > T::zero()) || !omega.is_finite() {
        return Err(Error::InvalidParameter(format!("oscillator frequency must be positive, got {omega}")));
    }
    if !coupling.is_finite() {
        return Err(Error::InvalidParameter(format!("coupling must be finite, got {coupling}")));
    }
    let range = BasisRange::new(range.start, range.dim)?;
    Ok(BandedComplexMatrix {
        range,
        diag: range.degrees().map(|n| cr(omega * T::from_usize_lossy(n))).collect(),
        off_diag: range
            .degrees()
            .take(range.dim - 1)
            .map(|n| cr(coupling * T::from_usize_lossy(n + 1).sqrt()))
            .collect(),
        bandwidth: 1,
        source: OperatorSource::DisplacedOscillator { omega, coupling },
    })
}

impl<T: Real> BandedComplexMatrix<T> {
    pub fn dim(&self) -> usize {
        self.range.dim
    }

    /// The same operator truncated to `dim` basis vectors.
    pub fn retruncate(&self, dim: usize) -> Result<Self> {
        let range = self.range.with_dim(dim)?;
        match self.source {
            OperatorSource::Gribov(p) => build_gribov_matrix(p, range),
            OperatorSource::DiagonalPower(kind) => build_diagonal_power_matrix(kind, range),
            OperatorSource::DisplacedOscillator { omega, coupling } => build_displaced_oscillator(omega, coupling, range),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        if i == j {
            self.diag[i]
        } else if i + 1 == j {
            self.off_diag[i]
        } else if j + 1 == i {
            self.off_diag[j]
        } else {
            cr(T::zero())
        }
    }

    pub fn apply(&self, x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        let mut y: Vec<Complex<T>> = self.diag.iter().zip(x).map(|(&d, &v)| d * v).collect();
        for (i, &h) in self.off_diag.iter().enumerate() {
            y[i] += h * x[i + 1];
            y[i + 1] += h * x[i];
        }
        Ok(y)
    }

    /// Dense copy; storage is column-major.
    pub fn to_dense(&self) -> CMatrix<T> {
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
        }
        for (i, &h) in self.off_diag.iter().enumerate() {
            m[(i, i + 1)] = h;
            m[(i + 1, i)] = h;
        }
        m
    }

    /// `self + c * other` for matrices on the same basis range.
    pub fn add_scaled(&self, other: &Self, c: T) -> Result<Self> {
        if self.range != other.range {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(Self {
            range: self.range,
            diag: self.diag.iter().zip(&other.diag).map(|(&a, &b)| a + b.scale(c)).collect(),
            off_diag: self.off_diag.iter().zip(&other.off_diag).map(|(&a, &b)| a + b.scale(c)).collect(),
            bandwidth: self.bandwidth.max(other.bandwidth),
            source: self.source,
        })
    }
}
