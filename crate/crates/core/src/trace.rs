//! Regularized eigenvalue sums of the cubic operator with contour corrections.
//!
//! For `H = l'' G + H1` with `H1` the `(mu, lambda)` part, the sum
//! `sum_{n<=m} (sigma_n - l'' lambda_n)` is corrected by
//! `(1/2 pi i) \oint Tr[(-1)^{k-1}/k (H1 R0(s))^k] ds`, `k = 1..4`, over a circle
//! whose radius sits in the gap `(l'' lambda_m, l'' lambda_{m+1})`, where
//! `R0(s) = (l'' G - s)^{-1}`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{build_gribov_matrix, cubic_eigenvalue, BasisRange, OperatorParams};
use crate::scalar::{cr, Real};
use crate::spectrum::all_eigenvalues;

/// Number of resolvent corrections.
pub const CORRECTIONS: usize = 4;
pub const DEFAULT_ALPHA: f64 = 0.15;
pub const DEFAULT_NODES: usize = 256;
/// Node-doubling tolerance, relative to `max(1, |value|)`.
pub const DEFAULT_CONTOUR_TOLERANCE: f64 = 1e-9;
pub const MAX_NODES: usize = 1 << 17;
pub const NEAR_POLE_DISTANCE: f64 = 1e-12;
/// Truncation per gap index demanded for tail control.
pub const DIM_PER_GAP: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContourKind {
    /// Arithmetic mean of the two eigenvalues bounding the gap.
    MidpointGap,
    /// Power mean with exponent `1/2 - alpha`.
    AlphaInterpolated,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ContourSpec<T: Real> {
    pub m: usize,
    pub radius: T,
    /// Starting number of trapezoid nodes; doubled until `tolerance` is met.
    pub nodes: usize,
    pub kind: ContourKind,
    pub alpha: Option<T>,
    pub tolerance: T,
}

impl<T: Real> ContourSpec<T> {
    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes;
        self
    }

    pub fn with_tolerance(mut self, tolerance: T) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn validate(&self, lambda_pp: T) -> Result<()> {
        if self.nodes < 64 || !self.nodes.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "contour needs an even number of nodes >= 64, got {}",
                self.nodes
            )));
        }
        if !(self.tolerance > T::zero()) {
            return Err(Error::InvalidParameter(format!("contour tolerance must be positive, got {}", self.tolerance)));
        }
        let lo = lambda_pp * cubic_eigenvalue::<T>(self.m);
        let hi = lambda_pp * cubic_eigenvalue::<T>(self.m + 1);
        if !(lo < self.radius && self.radius < hi) {
            return Err(Error::Gap(format!(
                "radius {} is not inside the gap ({lo}, {hi}) at m = {}",
                self.radius, self.m
            )));
        }
        Ok(())
    }
}

/// Circle radius in the `m`-th gap of `lambda_pp G`.
pub fn contour_radii<T: Real>(m: usize, lambda_pp: T, kind: ContourKind, alpha: Option<T>) -> Result<ContourSpec<T>> {
    if !(lambda_pp > T::zero()) || !lambda_pp.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda'' must be positive, got {lambda_pp}")));
    }
    if m < 3 {
        return Err(Error::Gap(format!("lambda_{m} = lambda_{} is a degenerate gap; need m >= 3", m + 1)));
    }
    let lo: T = cubic_eigenvalue(m);
    let hi: T = cubic_eigenvalue(m + 1);
    let (radius, alpha) = match kind {
        ContourKind::MidpointGap => ((lo + hi) / T::lit(2.0), None),
        ContourKind::AlphaInterpolated => {
            let a = alpha.unwrap_or(T::lit(DEFAULT_ALPHA));
            if !(a >= T::zero() && a < T::one() / T::lit(6.0)) {
                return Err(Error::InvalidParameter(format!("alpha must lie in [0, 1/6), got {a}")));
            }
            let beta = T::lit(0.5) - a;
            let mean = (lo.powf(beta) + hi.powf(beta)) / T::lit(2.0);
            (mean.powf(T::one() / beta), Some(a))
        }
    };
    let spec = ContourSpec {
        m,
        radius: lambda_pp * radius,
        nodes: DEFAULT_NODES,
        kind,
        alpha,
        tolerance: T::lit(DEFAULT_CONTOUR_TOLERANCE),
    };
    spec.validate(lambda_pp)?;
    Ok(spec)
}

/// Square band matrix; entry `(i, i + o)` for `|o| <= width`.
#[derive(Clone, Debug)]
struct Band<T: Real> {
    n: usize,
    width: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> Band<T> {
    fn zeros(n: usize, width: usize) -> Self {
        Band {
            n,
            width,
            data: vec![cr(T::zero()); n * (2 * width + 1)],
        }
    }

    fn idx(&self, i: usize, o: isize) -> usize {
        i * (2 * self.width + 1) + (o + self.width as isize) as usize
    }

    fn get(&self, i: usize, o: isize) -> Complex<T> {
        self.data[self.idx(i, o)]
    }

    fn mul(&self, other: &Self) -> Self {
        let (a, b) = (self.width as isize, other.width as isize);
        let mut c = Band::zeros(self.n, self.width + other.width);
        let n = self.n as isize;
        for i in 0..n {
            for oa in -a..=a {
                let k = i + oa;
                if k < 0 || k >= n {
                    continue;
                }
                let x = self.get(i as usize, oa);
                if x.re == T::zero() && x.im == T::zero() {
                    continue;
                }
                for ob in -b..=b {
                    let j = k + ob;
                    if j < 0 || j >= n {
                        continue;
                    }
                    let at = c.idx(i as usize, oa + ob);
                    c.data[at] += x * other.get(k as usize, ob);
                }
            }
        }
        c
    }

    fn trace(&self) -> Complex<T> {
        (0..self.n).fold(cr(T::zero()), |s, i| s + self.get(i, 0))
    }
}

fn check_params<T: Real>(params: &OperatorParams<T>) -> Result<()> {
    params.validate()?;
    if !(params.lambda_pp > T::zero()) {
        return Err(Error::InvalidParameter(format!("lambda'' must be positive, got {}", params.lambda_pp)));
    }
    if params.lambda_p != T::zero() {
        return Err(Error::UnsupportedRegime(
            "regularized traces are only available for lambda' = 0".into(),
        ));
    }
    Ok(())
}

/// Shared per-truncation data: the perturbation `H1` and the free spectrum.
struct Resolvent<T: Real> {
    /// `l'' lambda_n` for the basis degrees.
    free: Vec<T>,
    h1_diag: Vec<Complex<T>>,
    h1_off: Vec<Complex<T>>,
}

impl<T: Real> Resolvent<T> {
    fn new(params: &OperatorParams<T>, dim: usize) -> Result<Self> {
        let range = BasisRange::without_vacuum(dim)?;
        let h1 = build_gribov_matrix(params.without_cubic(), range)?;
        let free = range
            .degrees()
            .map(|n| params.lambda_pp * cubic_eigenvalue::<T>(n))
            .collect();
        Ok(Resolvent {
            free,
            h1_diag: h1.diag,
            h1_off: h1.off_diag,
        })
    }

    fn diagonal(&self, sigma: Complex<T>) -> Result<Vec<Complex<T>>> {
        self.free
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let d = cr(l) - sigma;
                if d.norm() < T::lit(NEAR_POLE_DISTANCE) {
                    return Err(Error::NearPole {
                        index: i,
                        distance: d.norm().as_f64(),
                    });
                }
                Ok(d.inv())
            })
            .collect()
    }

    /// `Tr[(H1 R0)^k]` for `k = 1..=4` from banded products.
    fn banded_traces(&self, sigma: Complex<T>) -> Result<[Complex<T>; CORRECTIONS]> {
        let r = self.diagonal(sigma)?;
        let n = r.len();
        let mut a = Band::zeros(n, 1);
        for i in 0..n {
            let at = a.idx(i, 0);
            a.data[at] = self.h1_diag[i] * r[i];
            if i + 1 < n {
                let up = a.idx(i, 1);
                a.data[up] = self.h1_off[i] * r[i + 1];
                let dn = a.idx(i + 1, -1);
                a.data[dn] = self.h1_off[i] * r[i];
            }
        }
        let a2 = a.mul(&a);
        let a3 = a2.mul(&a);
        let a4 = a2.mul(&a2);
        Ok([a.trace(), a2.trace(), a3.trace(), a4.trace()])
    }

    /// All four traces with the first one from the diagonal closed form.
    fn traces(&self, sigma: Complex<T>) -> Result<[Complex<T>; CORRECTIONS]> {
        let mut t = self.banded_traces(sigma)?;
        t[0] = self.first_trace(sigma)?;
        Ok(t)
    }

    fn first_trace(&self, sigma: Complex<T>) -> Result<Complex<T>> {
        let r = self.diagonal(sigma)?;
        Ok(self.h1_diag.iter().zip(&r).fold(cr(T::zero()), |s, (&h, &x)| s + h * x))
    }
}

/// `Tr[(H1 (l'' G - sigma)^{-1})^k]` on the first `dim` vacuum-free basis states.
pub fn correction_trace<T: Real>(params: &OperatorParams<T>, sigma: Complex<T>, k: usize, dim: usize) -> Result<Complex<T>> {
    check_params(params)?;
    if !(1..=CORRECTIONS).contains(&k) {
        return Err(Error::InvalidParameter(format!("correction order must be in 1..=4, got {k}")));
    }
    let res = Resolvent::new(params, dim)?;
    if k == 1 {
        return res.first_trace(sigma);
    }
    Ok(res.banded_traces(sigma)?[k - 1])
}

/// Same as [`correction_trace`] but always through the banded product.
pub fn correction_trace_banded<T: Real>(
    params: &OperatorParams<T>,
    sigma: Complex<T>,
    k: usize,
    dim: usize,
) -> Result<Complex<T>> {
    check_params(params)?;
    if !(1..=CORRECTIONS).contains(&k) {
        return Err(Error::InvalidParameter(format!("correction order must be in 1..=4, got {k}")));
    }
    Ok(Resolvent::new(params, dim)?.banded_traces(sigma)?[k - 1])
}

fn weight<T: Real>(k: usize) -> T {
    let s = if k % 2 == 1 { T::one() } else { -T::one() };
    s / T::from_usize_lossy(k)
}

/// Trapezoid sums of all four weighted corrections with node doubling.
/// Returns the values and the number of nodes that met the tolerance.
fn contour_all<T: Real>(res: &Resolvent<T>, spec: &ContourSpec<T>) -> Result<([Complex<T>; CORRECTIONS], usize)> {
    let two_pi = T::TAU();
    // (1/2 pi i) \oint f ds with s = r e^{i theta} is the mean of f(s) s.
    let node_sum = |m: usize, offset: usize, stride: usize| -> Result<[Complex<T>; CORRECTIONS]> {
        let mut acc = [cr(T::zero()); CORRECTIONS];
        let mut j = offset;
        while j < m {
            let theta = two_pi * T::from_usize_lossy(j) / T::from_usize_lossy(m);
            let s = Complex::from_polar(spec.radius, theta);
            let tr = res.traces(s)?;
            for k in 0..CORRECTIONS {
                acc[k] += tr[k] * s;
            }
            j += stride;
        }
        Ok(acc)
    };
    let mut m = spec.nodes;
    let mut sum = node_sum(m, 0, 1)?;
    loop {
        let odd = node_sum(2 * m, 1, 2)?;
        let mut diff = T::zero();
        let mut scale = T::one();
        let mut next = [cr(T::zero()); CORRECTIONS];
        for k in 0..CORRECTIONS {
            next[k] = sum[k] + odd[k];
            let w: T = weight(k + 1);
            let a = sum[k].scale(w / T::from_usize_lossy(m));
            let b = next[k].scale(w / T::from_usize_lossy(2 * m));
            diff = diff.max((a - b).norm());
            scale = scale.max(b.norm());
        }
        m *= 2;
        sum = next;
        if diff <= spec.tolerance * scale {
            let out = core::array::from_fn(|k| sum[k].scale(weight::<T>(k + 1) / T::from_usize_lossy(m)));
            return Ok((out, m));
        }
        if 2 * m > MAX_NODES {
            return Err(Error::QuadratureResolution {
                nodes: m / 2,
                doubled: m,
                difference: diff.as_f64(),
            });
        }
    }
}

fn check_dim(m: usize, dim: usize) -> Result<()> {
    if dim < DIM_PER_GAP * m {
        return Err(Error::InvalidParameter(format!(
            "truncation {dim} is below {DIM_PER_GAP} * m = {}",
            DIM_PER_GAP * m
        )));
    }
    Ok(())
}

/// `(1/2 pi i) \oint (-1)^{k-1}/k Tr[(H1 R0(s))^k] ds` over the circle of `spec`.
pub fn contour_correction<T: Real>(params: &OperatorParams<T>, spec: &ContourSpec<T>, k: usize, dim: usize) -> Result<Complex<T>> {
    check_params(params)?;
    spec.validate(params.lambda_pp)?;
    check_dim(spec.m, dim)?;
    if !(1..=CORRECTIONS).contains(&k) {
        return Err(Error::InvalidParameter(format!("correction order must be in 1..=4, got {k}")));
    }
    let res = Resolvent::new(params, dim)?;
    Ok(contour_all(&res, spec)?.0[k - 1])
}

/// How the truncation follows the gap index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceDim {
    Fixed(usize),
    /// `factor * m` for each row.
    Proportional(usize),
}

impl TraceDim {
    pub fn for_gap(self, m: usize) -> usize {
        match self {
            TraceDim::Fixed(d) => d,
            TraceDim::Proportional(f) => f * m,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TraceRow<T: Real> {
    pub m: usize,
    pub radius: T,
    pub raw_sum: T,
    /// Weighted contour corrections as `[re, im]`.
    pub corrections: [[T; 2]; CORRECTIONS],
    pub regularized_re: T,
    pub regularized_im: T,
}

impl<T: Real> TraceRow<T> {
    pub fn correction(&self, k: usize) -> Complex<T> {
        let [re, im] = self.corrections[k - 1];
        Complex::new(re, im)
    }
}

/// Per-row contour data that is not part of the row schema.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourMeta {
    pub m: usize,
    pub dim: usize,
    pub nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TraceReport<T: Real> {
    pub params: OperatorParams<T>,
    pub kind: ContourKind,
    pub alpha: Option<T>,
    pub rows: Vec<TraceRow<T>>,
    pub contours: Vec<ContourMeta>,
}

/// Pair the sorted eigenvalues with `l'' lambda_n`, `n = 1..=m`: every
/// distinct free level owns the cell between the midpoints to its neighbours
/// and must hold exactly as many eigenvalues as its multiplicity.
fn pair<T: Real>(sorted: &[Complex<T>], lambda_pp: T, m: usize) -> Result<Vec<Complex<T>>> {
    let level = |n: usize| lambda_pp * cubic_eigenvalue::<T>(n);
    let mut out = Vec::with_capacity(m);
    let mut n = 1;
    let mut lower = T::neg_infinity();
    while n <= m {
        let mut hi = n;
        while level(hi + 1) == level(n) {
            hi += 1;
        }
        if hi > m {
            return Err(Error::Gap(format!("m = {m} splits the degenerate level lambda_{n}")));
        }
        let upper = (level(n) + level(hi + 1)) / T::lit(2.0);
        let inside: Vec<Complex<T>> = sorted.iter().copied().filter(|z| z.re > lower && z.re <= upper).collect();
        if inside.len() != hi - n + 1 {
            let cands: Vec<String> = inside.iter().map(|z| format!("{}{:+}i", z.re, z.im)).collect();
            return Err(Error::PairingAmbiguity(format!(
                "level {} (n = {n}..={hi}) has {} eigenvalues in ({lower}, {upper}]: [{}]",
                level(n),
                inside.len(),
                cands.join(", ")
            )));
        }
        out.extend(inside);
        lower = upper;
        n = hi + 1;
    }
    Ok(out)
}

/// Regularized partial sums for each `m` in `m_values`.
pub fn regularized_partial_sums<T: Real>(
    params: &OperatorParams<T>,
    m_values: &[usize],
    dim: TraceDim,
    kind: ContourKind,
    alpha: Option<T>,
) -> Result<TraceReport<T>> {
    check_params(params)?;
    let mut rows = Vec::with_capacity(m_values.len());
    let mut contours = Vec::with_capacity(m_values.len());
    let mut cached: Option<(usize, Vec<Complex<T>>, Resolvent<T>)> = None;
    let mut used_alpha = None;
    for &m in m_values {
        let spec = contour_radii(m, params.lambda_pp, kind, alpha)?;
        used_alpha = spec.alpha;
        let d = dim.for_gap(m);
        check_dim(m, d)?;
        if cached.as_ref().map(|c| c.0) != Some(d) {
            let matrix = build_gribov_matrix(*params, BasisRange::without_vacuum(d)?)?;
            let mut sigma = all_eigenvalues(&matrix)?;
            crate::linalg::sort_by_real(&mut sigma);
            cached = Some((d, sigma, Resolvent::new(params, d)?));
        }
        let (_, sigma, res) = cached.as_ref().expect("filled above");
        let paired = pair(sigma, params.lambda_pp, m)?;
        let raw: Complex<T> = paired
            .iter()
            .enumerate()
            .fold(cr(T::zero()), |s, (i, &z)| s + z - cr(params.lambda_pp * cubic_eigenvalue::<T>(i + 1)));
        let (corr, nodes) = contour_all(res, &spec)?;
        let total = corr.iter().fold(raw, |s, &c| s + c);
        rows.push(TraceRow {
            m,
            radius: spec.radius,
            raw_sum: raw.re,
            corrections: corr.map(|c| [c.re, c.im]),
            regularized_re: total.re,
            regularized_im: total.im,
        });
        contours.push(ContourMeta { m, dim: d, nodes });
    }
    Ok(TraceReport {
        params: *params,
        kind,
        alpha: used_alpha,
        rows,
        contours,
    })
}
