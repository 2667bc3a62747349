//! Dense complex linear algebra used by the spectral routines.

mod dense;
mod eigen;
mod expm;
mod lu;
mod svd;

pub use dense::CMatrix;
pub use eigen::{eigen, eigenvalues, sort_by_real, sort_pairs_by_real};
pub use expm::expm;
pub use lu::Lu;
pub use svd::singular_values;
