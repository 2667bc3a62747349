use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("unsupported parameter regime: {0}")]
    UnsupportedRegime(String),

    #[error("{what} did not converge after {iterations} iterations")]
    NotConverged { what: &'static str, iterations: usize },

    #[error("QR iteration stalled after {iterations} sweeps; {} eigenvalues had converged", converged.len())]
    EigenSolver {
        iterations: usize,
        /// Eigenvalues deflated before the failure, as `[re, im]`.
        converged: Vec<[f64; 2]>,
    },

    #[error("truncation not converged: eigenvalue {index} drifted by {drift:e} (tolerance {tolerance:e})")]
    Truncation {
        index: usize,
        drift: f64,
        tolerance: f64,
    },

    #[error("contour passes within {distance:e} of the unperturbed pole {index}")]
    NearPole { index: usize, distance: f64 },

    #[error("no spectral gap: {0}")]
    Gap(String),

    #[error("contour quadrature unresolved: {nodes} vs {doubled} nodes differ by {difference:e}")]
    QuadratureResolution {
        nodes: usize,
        doubled: usize,
        difference: f64,
    },

    #[error("eigenvalue pairing is ambiguous: {0}")]
    PairingAmbiguity(String),

    #[error("bilinear norm of eigenvector {index} is {norm:e}: exceptional point")]
    ExceptionalPoint { index: usize, norm: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{quantity} changed by {change:e} under grid refinement (tolerance {tolerance:e})")]
    Resolution {
        quantity: &'static str,
        change: f64,
        tolerance: f64,
    },

    #[error("singular matrix")]
    Singular,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures that stem from numerical non-convergence rather than bad input.
    pub fn is_convergence_failure(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. }
                | Error::EigenSolver { .. }
                | Error::Truncation { .. }
                | Error::QuadratureResolution { .. }
                | Error::PairingAmbiguity(_)
                | Error::ExceptionalPoint { .. }
                | Error::Resolution { .. }
                | Error::Singular
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
