//! Spectral analysis of the Gribov-Intissar operators
//! `H = l'' A*^3 A^3 + l' A*^2 A^2 + mu A*A + i lambda A*(A + A*)A`.
//!
//! Two representations are provided: tridiagonal truncations in the
//! orthonormal Bargmann basis (`operator`, `spectrum`, `semigroup`, `trace`)
//! and discretized integral kernels of the inverse (`kernel`). Everything is
//! generic over the real scalar; the `*F64` aliases below fix it to `f64`.

pub mod error;
pub mod export;
pub mod kernel;
pub mod linalg;
pub mod operator;
pub mod quadrature;
pub mod scalar;
pub mod semigroup;
pub mod spectrum;
pub mod trace;

pub use error::{Error, Result};
pub use scalar::Real;

pub type OperatorParamsF64 = operator::OperatorParams<f64>;
pub type BandedComplexMatrixF64 = operator::BandedComplexMatrix<f64>;
pub type CMatrixF64 = linalg::CMatrix<f64>;
pub type SpectrumResultF64 = spectrum::SpectrumResult<f64>;
pub type RealityReportF64 = spectrum::RealityReport<f64>;
pub type BiorthogonalSystemF64 = spectrum::BiorthogonalSystem<f64>;
pub type KernelOperatorF64 = kernel::KernelOperator<f64>;
pub type GridSpecF64 = kernel::GridSpec<f64>;
pub type PerronRootF64 = kernel::PerronRoot<f64>;
pub type PropagatorReportF64 = semigroup::PropagatorReport<f64>;
pub type TraceAsymptoticsRowF64 = semigroup::TraceAsymptoticsRow<f64>;
pub type ContourSpecF64 = trace::ContourSpec<f64>;
pub type TraceReportF64 = trace::TraceReport<f64>;
pub type TraceRowF64 = trace::TraceRow<f64>;
