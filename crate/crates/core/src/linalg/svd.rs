use num_complex::Complex;

use super::dense::CMatrix;
use crate::error::{Error, Result};
use crate::scalar::{cr, Real};

const MAX_SWEEPS: usize = 80;

/// Singular values in descending order, by one-sided Jacobi rotations.
///
/// One-sided Jacobi keeps small singular values to high relative accuracy,
/// which matters for trace norms of rapidly decaying operators.
pub fn singular_values<T: Real>(a: &CMatrix<T>) -> Result<Vec<T>> {
    let work = if a.rows() >= a.cols() { a.clone() } else { a.adjoint() };
    let m = work.rows();
    let n = work.cols();
    let mut cols: Vec<Vec<Complex<T>>> = (0..n).map(|j| work.col(j).to_vec()).collect();
    let mut norms: Vec<T> = cols.iter().map(|c| c.iter().map(|z| z.norm_sqr()).sum()).collect();
    let tol = T::epsilon() * T::from_usize_lossy(m.max(1)).sqrt();

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = norms[p];
                let beta = norms[q];
                if alpha == T::zero() || beta == T::zero() {
                    continue;
                }
                let mut gamma = cr(T::zero());
                for (x, y) in cols[p].iter().zip(&cols[q]) {
                    gamma += x.conj() * y;
                }
                let g = gamma.norm();
                if g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma.unscale(g).conj();
                let zeta = (beta - alpha) / (T::lit(2.0) * g);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                let cp = &mut left[p];
                let cq = &mut right[0];
                let mut np = T::zero();
                let mut nq = T::zero();
                for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
                    let yq = *y * phase;
                    let xp = x.scale(c) - yq.scale(s);
                    let yn = x.scale(s) + yq.scale(c);
                    np += xp.norm_sqr();
                    nq += yn.norm_sqr();
                    *x = xp;
                    *y = yn;
                }
                norms[p] = np;
                norms[q] = nq;
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::NotConverged {
            what: "one-sided Jacobi SVD",
            iterations: MAX_SWEEPS,
        });
    }
    let mut sv: Vec<T> = cols
        .iter()
        .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt())
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    Ok(sv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn diagonal_magnitudes() {
        let d = [Complex64::new(3.0, 4.0), Complex64::new(0.0, -1.0), Complex64::new(0.5, 0.0)];
        let sv = singular_values(&CMatrix::from_diagonal(&d)).unwrap();
        assert_eq!(sv.len(), 3);
        assert!((sv[0] - 5.0).abs() < 1e-15);
        assert!((sv[1] - 1.0).abs() < 1e-15);
        assert!((sv[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn frobenius_identity_on_rectangular() {
        let a = CMatrix::from_fn(7, 4, |i, j| Complex64::new((i as f64 - j as f64).sin(), (i * j) as f64 * 0.1));
        let sv = singular_values(&a).unwrap();
        let f2: f64 = sv.iter().map(|s| s * s).sum();
        assert!((f2.sqrt() - a.norm_fro()).abs() < 1e-13);
        let svt = singular_values(&a.adjoint()).unwrap();
        for (x, y) in sv.iter().zip(&svt) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn rank_one_matrix() {
        let u = [1.0, 2.0, 2.0];
        let v = [Complex64::new(0.0, 1.0), Complex64::new(1.0, 0.0)];
        let a = CMatrix::from_fn(3, 2, |i, j| v[j] * u[i]);
        let sv = singular_values(&a).unwrap();
        assert!((sv[0] - 3.0 * 2f64.sqrt()).abs() < 1e-14);
        assert!(sv[1].abs() < 1e-14);
    }
}
