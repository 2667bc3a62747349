//! Eigenvalues and eigenvectors of general complex matrices.
//!
//! Diagonal balancing, Householder reduction to Hessenberg form and a
//! single-shift complex QR iteration to Schur form. Eigenvectors come from
//! back-substitution on the triangular factor.

use num_complex::Complex;

use super::dense::CMatrix;
use crate::error::{Error, Result};
use crate::scalar::{cr, l1, Real};

const MAX_SWEEPS_PER_EIGENVALUE: usize = 120;

/// Eigenvalues in the order they deflate.
pub fn eigenvalues<T: Real>(a: &CMatrix<T>) -> Result<Vec<Complex<T>>> {
    let mut h = a.clone();
    check_square(&h)?;
    balance(&mut h);
    hessenberg(&mut h, None);
    schur(&mut h, None, false)?;
    Ok(h.diagonal())
}

/// Eigenvalues and unit 2-norm right eigenvectors (as columns).
pub fn eigen<T: Real>(a: &CMatrix<T>) -> Result<(Vec<Complex<T>>, CMatrix<T>)> {
    check_square(a)?;
    let n = a.rows();
    let mut t = a.clone();
    let scale = balance(&mut t);
    let mut z = CMatrix::identity(n);
    hessenberg(&mut t, Some(&mut z));
    schur(&mut t, Some(&mut z), true)?;
    let values = t.diagonal();
    let mut vectors = triangular_eigenvectors(&t, &z);
    for j in 0..n {
        let col = vectors.col_mut(j);
        for (v, &d) in col.iter_mut().zip(&scale) {
            *v = v.scale(d);
        }
        let nrm = col.iter().map(|v| v.norm_sqr()).sum::<T>().sqrt();
        if nrm > T::zero() {
            for v in col.iter_mut() {
                *v = v.unscale(nrm);
            }
        }
    }
    Ok((values, vectors))
}

/// Sorts eigenvalues by real part, then imaginary part.
pub fn sort_by_real<T: Real>(values: &mut [Complex<T>]) {
    values.sort_by(|a, b| cmp_complex(a, b));
}

/// Same ordering applied to an eigen decomposition.
pub fn sort_pairs_by_real<T: Real>(values: Vec<Complex<T>>, vectors: CMatrix<T>) -> (Vec<Complex<T>>, CMatrix<T>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| cmp_complex(&values[i], &values[j]));
    let sorted = order.iter().map(|&i| values[i]).collect();
    let vecs = CMatrix::from_fn(vectors.rows(), order.len(), |r, c| vectors[(r, order[c])]);
    (sorted, vecs)
}

fn cmp_complex<T: Real>(a: &Complex<T>, b: &Complex<T>) -> std::cmp::Ordering {
    a.re.partial_cmp(&b.re)
        .unwrap_or(std::cmp::Ordering::Equal)
        .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
}

fn check_square<T: Real>(a: &CMatrix<T>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            got: a.cols(),
        });
    }
    Ok(())
}

/// Scales rows and columns by powers of two so that off-diagonal row and
/// column norms are comparable. Returns the diagonal similarity `D` with
/// `A <- D^{-1} A D`.
fn balance<T: Real>(a: &mut CMatrix<T>) -> Vec<T> {
    let n = a.rows();
    let radix = T::lit(2.0);
    let sqrdx = radix * radix;
    let mut d = vec![T::one(); n];
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = T::zero();
            let mut r = T::zero();
            for j in 0..n {
                if j != i {
                    c += l1(a[(j, i)]);
                    r += l1(a[(i, j)]);
                }
            }
            if c == T::zero() || r == T::zero() {
                continue;
            }
            let s = c + r;
            let mut f = T::one();
            let mut g = r / radix;
            while c < g {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= sqrdx;
            }
            if (c + r) / f < T::lit(0.95) * s {
                done = false;
                d[i] *= f;
                for j in 0..n {
                    a[(i, j)] = a[(i, j)].unscale(f);
                    a[(j, i)] = a[(j, i)].scale(f);
                }
            }
        }
    }
    d
}

/// Householder reduction to upper Hessenberg form, accumulating into `q`.
/// Columns that are already reduced are left untouched, so tridiagonal and
/// diagonal input pass through exactly.
fn hessenberg<T: Real>(a: &mut CMatrix<T>, mut q: Option<&mut CMatrix<T>>) {
    let n = a.rows();
    if n < 3 {
        return;
    }
    let mut v = vec![cr(T::zero()); n];
    for k in 0..n - 2 {
        let tail: T = (k + 2..n).map(|i| a[(i, k)].norm_sqr()).sum();
        if tail == T::zero() {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let xnorm = (tail + x0.norm_sqr()).sqrt();
        let phase = if x0.norm() > T::zero() { x0.unscale(x0.norm()) } else { cr(T::one()) };
        let len = n - k - 1;
        v[0] = x0 + phase.scale(xnorm);
        for i in 1..len {
            v[i] = a[(k + 1 + i, k)];
        }
        let vnorm2: T = v[..len].iter().map(|z| z.norm_sqr()).sum();
        let tau = T::lit(2.0) / vnorm2;

        // rows k+1.. of columns k..
        for j in k..n {
            let mut s = cr(T::zero());
            for i in 0..len {
                s += v[i].conj() * a[(k + 1 + i, j)];
            }
            s = s.scale(tau);
            for i in 0..len {
                a[(k + 1 + i, j)] -= v[i] * s;
            }
        }
        // columns k+1.. of all rows
        for i in 0..n {
            let mut s = cr(T::zero());
            for l in 0..len {
                s += a[(i, k + 1 + l)] * v[l];
            }
            s = s.scale(tau);
            for l in 0..len {
                a[(i, k + 1 + l)] -= s * v[l].conj();
            }
        }
        if let Some(q) = q.as_deref_mut() {
            for i in 0..n {
                let mut s = cr(T::zero());
                for l in 0..len {
                    s += q[(i, k + 1 + l)] * v[l];
                }
                s = s.scale(tau);
                for l in 0..len {
                    q[(i, k + 1 + l)] -= s * v[l].conj();
                }
            }
        }
        a[(k + 1, k)] = -phase.scale(xnorm);
        for i in k + 2..n {
            a[(i, k)] = cr(T::zero());
        }
    }
}

/// Plane rotation `[c s; -conj(s) c]` with real `c` that maps `(a, b)` to `(r, 0)`.
#[derive(Clone, Copy)]
struct Givens<T: Real> {
    c: T,
    s: Complex<T>,
}

impl<T: Real> Givens<T> {
    fn new(a: Complex<T>, b: Complex<T>) -> (Self, Complex<T>) {
        let na = a.norm();
        let nb = b.norm();
        if nb == T::zero() {
            return (Self { c: T::one(), s: cr(T::zero()) }, a);
        }
        if na == T::zero() {
            return (Self { c: T::zero(), s: b.conj().unscale(nb) }, cr(nb));
        }
        let norm = na.hypot(nb);
        let phase = a.unscale(na);
        let g = Self {
            c: na / norm,
            s: phase * b.conj().unscale(norm),
        };
        (g, phase.scale(norm))
    }

    #[inline]
    fn rows(&self, x: Complex<T>, y: Complex<T>) -> (Complex<T>, Complex<T>) {
        (x.scale(self.c) + self.s * y, -self.s.conj() * x + y.scale(self.c))
    }

    #[inline]
    fn cols(&self, x: Complex<T>, y: Complex<T>) -> (Complex<T>, Complex<T>) {
        (x.scale(self.c) + y * self.s.conj(), -x * self.s + y.scale(self.c))
    }
}

/// Reduces an upper Hessenberg matrix to upper triangular (Schur) form.
/// With `full == false` only the eigenvalues on the diagonal are meaningful.
fn schur<T: Real>(h: &mut CMatrix<T>, mut z: Option<&mut CMatrix<T>>, full: bool) -> Result<()> {
    let n = h.rows();
    if n == 0 {
        return Ok(());
    }
    let ulp = T::epsilon();
    let smlnum = T::min_positive_value() * (T::from_usize_lossy(n) / ulp);
    let mut i = n - 1;
    loop {
        let mut converged = false;
        let mut l = 0;
        for its in 0..=MAX_SWEEPS_PER_EIGENVALUE {
            l = 0;
            for k in (1..=i).rev() {
                if negligible_subdiagonal(h, k, ulp, smlnum) {
                    l = k;
                    break;
                }
            }
            if l > 0 {
                h[(l, l - 1)] = cr(T::zero());
            }
            if l >= i {
                converged = true;
                break;
            }
            if its == MAX_SWEEPS_PER_EIGENVALUE {
                break;
            }
            let shift = if its == 10 {
                h[(l, l)] + cr(T::lit(0.75) * h[(l + 1, l)].re.abs())
            } else if its == 20 {
                h[(i, i)] + cr(T::lit(0.75) * h[(i, i - 1)].re.abs())
            } else {
                wilkinson_shift(h[(i - 1, i - 1)], h[(i - 1, i)], h[(i, i - 1)], h[(i, i)])
            };
            qr_sweep(h, z.as_deref_mut(), l, i, shift, full);
        }
        if !converged {
            let partial = (i + 1..n).map(|j| [h[(j, j)].re.as_f64(), h[(j, j)].im.as_f64()]).collect();
            return Err(Error::EigenSolver {
                iterations: MAX_SWEEPS_PER_EIGENVALUE,
                converged: partial,
            });
        }
        if l == 0 {
            break;
        }
        i = l - 1;
    }
    Ok(())
}

fn negligible_subdiagonal<T: Real>(h: &CMatrix<T>, k: usize, ulp: T, smlnum: T) -> bool {
    let sub = l1(h[(k, k - 1)]);
    if sub <= smlnum {
        return true;
    }
    let mut tst = l1(h[(k - 1, k - 1)]) + l1(h[(k, k)]);
    if tst == T::zero() {
        if k >= 2 {
            tst += h[(k - 1, k - 2)].re.abs();
        }
        if k + 1 < h.rows() {
            tst += h[(k + 1, k)].re.abs();
        }
    }
    if h[(k, k - 1)].re.abs() > ulp * tst {
        return false;
    }
    // conservative test that preserves relative accuracy of small eigenvalues
    let up = l1(h[(k - 1, k)]);
    let ab = sub.max(up);
    let ba = sub.min(up);
    let d = l1(h[(k - 1, k - 1)] - h[(k, k)]);
    let hk = l1(h[(k, k)]);
    let aa = hk.max(d);
    let bb = hk.min(d);
    let s = aa + ab;
    ba * (ab / s) <= smlnum.max(ulp * (bb * (aa / s)))
}

fn wilkinson_shift<T: Real>(a: Complex<T>, b: Complex<T>, c: Complex<T>, d: Complex<T>) -> Complex<T> {
    let p = (a - d).unscale(T::lit(2.0));
    let bc = b * c;
    let mut disc = (p * p + bc).sqrt();
    if (p + disc).norm() < (p - disc).norm() {
        disc = -disc;
    }
    let den = p + disc;
    if den.norm() == T::zero() {
        d
    } else {
        d - bc / den
    }
}

fn qr_sweep<T: Real>(
    h: &mut CMatrix<T>,
    mut z: Option<&mut CMatrix<T>>,
    l: usize,
    i: usize,
    shift: Complex<T>,
    full: bool,
) {
    let n = h.rows();
    let col_end = if full { n } else { i + 1 };
    let row_start = if full { 0 } else { l };
    for k in l..i {
        let (g, first_col) = if k == l {
            let (g, _) = Givens::new(h[(l, l)] - shift, h[(l + 1, l)]);
            (g, k)
        } else {
            let (g, r) = Givens::new(h[(k, k - 1)], h[(k + 1, k - 1)]);
            h[(k, k - 1)] = r;
            h[(k + 1, k - 1)] = cr(T::zero());
            (g, k)
        };
        for j in first_col..col_end {
            let (x, y) = g.rows(h[(k, j)], h[(k + 1, j)]);
            h[(k, j)] = x;
            h[(k + 1, j)] = y;
        }
        let last_row = (k + 2).min(i);
        for r in row_start..=last_row {
            let (x, y) = g.cols(h[(r, k)], h[(r, k + 1)]);
            h[(r, k)] = x;
            h[(r, k + 1)] = y;
        }
        if let Some(z) = z.as_deref_mut() {
            for r in 0..n {
                let (x, y) = g.cols(z[(r, k)], z[(r, k + 1)]);
                z[(r, k)] = x;
                z[(r, k + 1)] = y;
            }
        }
    }
}

/// Right eigenvectors of `Z T Z^H` from the Schur factor `t` and Schur vectors `z`.
fn triangular_eigenvectors<T: Real>(t: &CMatrix<T>, z: &CMatrix<T>) -> CMatrix<T> {
    let n = t.rows();
    let ulp = T::epsilon();
    let smlnum = T::min_positive_value() * (T::from_usize_lossy(n.max(1)) / ulp);
    let big = T::one() / (ulp * ulp);
    let mut out = CMatrix::zeros(n, n);
    let mut x = vec![cr(T::zero()); n];
    for k in 0..n {
        let tkk = t[(k, k)];
        let smin = (ulp * l1(tkk)).max(smlnum);
        x[..=k].iter_mut().for_each(|v| *v = cr(T::zero()));
        x[k] = cr(T::one());
        for j in (0..k).rev() {
            let mut s = cr(T::zero());
            for l in j + 1..=k {
                s += t[(j, l)] * x[l];
            }
            let mut d = t[(j, j)] - tkk;
            if l1(d) < smin {
                d = cr(smin);
            }
            x[j] = -s / d;
            if l1(x[j]) > big {
                let m = x[j..=k].iter().map(|v| l1(*v)).fold(T::zero(), T::max);
                for v in x[j..=k].iter_mut() {
                    *v = v.unscale(m);
                }
            }
        }
        let col = out.col_mut(k);
        for l in 0..=k {
            let xl = x[l];
            if xl.re == T::zero() && xl.im == T::zero() {
                continue;
            }
            for (c, &zv) in col.iter_mut().zip(z.col(l)) {
                *c += zv * xl;
            }
        }
    }
    out
}
