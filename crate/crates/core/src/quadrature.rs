//! Gauss-Legendre rules, composite panel rules and adaptive Gauss-Kronrod.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Gauss-Legendre rule on `[-1, 1]`, nodes ascending.
#[derive(Clone, Debug)]
pub struct GaussLegendre<T: Real> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> GaussLegendre<T> {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "rule needs at least one node");
        let mut nodes = vec![T::zero(); n];
        let mut weights = vec![T::zero(); n];
        let nf = n as f64;
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton in the target precision
            let guess = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut x = T::lit(guess);
            let mut dp = T::one();
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= T::epsilon() * T::lit(0.5) {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
            let w = T::lit(2.0) / ((T::one() - x * x) * dp * dp);
            nodes[n - 1 - i] = x;
            nodes[i] = -x;
            weights[n - 1 - i] = w;
            weights[i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = T::zero();
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped affinely onto `[a, b]`.
    pub fn mapped(&self, a: T, b: T) -> impl Iterator<Item = (T, T)> + '_ {
        let h = (b - a) * T::lit(0.5);
        let c = (a + b) * T::lit(0.5);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (c + h * x, h * w))
    }

    pub fn integrate(&self, a: T, b: T, mut f: impl FnMut(T) -> T) -> T {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative<T: Real>(n: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    for k in 2..=n {
        let kf = T::from_usize_lossy(k);
        let p2 = ((T::lit(2.0) * kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = T::from_usize_lossy(n);
    let d = nf * (x * p1 - p0) / (x * x - T::one());
    (p1, d)
}

/// Composite Gauss rule over consecutive break points.
#[derive(Clone, Debug)]
pub struct PanelRule<T: Real> {
    pub breaks: Vec<T>,
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
    /// Panel index of every node.
    pub panel: Vec<usize>,
    pub order: usize,
}

impl<T: Real> PanelRule<T> {
    pub fn new(breaks: Vec<T>, order: usize) -> Self {
        let rule = GaussLegendre::new(order);
        let mut nodes = Vec::with_capacity(order * breaks.len());
        let mut weights = Vec::with_capacity(nodes.capacity());
        let mut panel = Vec::with_capacity(nodes.capacity());
        for (p, win) in breaks.windows(2).enumerate() {
            for (x, w) in rule.mapped(win[0], win[1]) {
                nodes.push(x);
                weights.push(w);
                panel.push(p);
            }
        }
        Self {
            breaks,
            nodes,
            weights,
            panel,
            order,
        }
    }

    pub fn panels(&self) -> usize {
        self.breaks.len().saturating_sub(1)
    }

    pub fn panel_bounds(&self, p: usize) -> (T, T) {
        (self.breaks[p], self.breaks[p + 1])
    }

    pub fn panel_nodes(&self, p: usize) -> std::ops::Range<usize> {
        p * self.order..(p + 1) * self.order
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug)]
pub struct Quadrature<T> {
    pub value: T,
    pub error: T,
    pub intervals: usize,
}

fn kronrod_15<T: Real>(f: &mut impl FnMut(T) -> T, a: T, b: T) -> (T, T) {
    let c = (a + b) * T::lit(0.5);
    let h = (b - a) * T::lit(0.5);
    let fc = f(c);
    let mut rk = fc * T::lit(WGK[7]);
    let mut rg = fc * T::lit(WG[3]);
    let mut fvals = [T::zero(); 14];
    for j in 0..7 {
        let x = h * T::lit(XGK[j]);
        let f1 = f(c - x);
        let f2 = f(c + x);
        fvals[2 * j] = f1;
        fvals[2 * j + 1] = f2;
        rk += T::lit(WGK[j]) * (f1 + f2);
        if j % 2 == 1 {
            rg += T::lit(WG[j / 2]) * (f1 + f2);
        }
    }
    let mean = rk * T::lit(0.5);
    let mut asc = T::lit(WGK[7]) * (fc - mean).abs();
    let mut abs = T::lit(WGK[7]) * fc.abs();
    for j in 0..7 {
        let (f1, f2) = (fvals[2 * j], fvals[2 * j + 1]);
        asc += T::lit(WGK[j]) * ((f1 - mean).abs() + (f2 - mean).abs());
        abs += T::lit(WGK[j]) * (f1.abs() + f2.abs());
    }
    let value = rk * h;
    let abs = abs * h.abs();
    let asc = asc * h.abs();
    let mut err = ((rk - rg) * h).abs();
    if asc != T::zero() && err != T::zero() {
        let scale = (T::lit(200.0) * err / asc).powf(T::lit(1.5));
        err = if scale < T::one() { asc * scale } else { asc };
    }
    let floor = T::lit(50.0) * T::epsilon() * abs;
    if abs > T::min_positive_value() / (T::lit(50.0) * T::epsilon()) && floor > err {
        err = floor;
    }
    (value, err)
}

/// Globally adaptive 7/15-point Gauss-Kronrod quadrature on a finite interval.
pub fn adaptive<T: Real>(mut f: impl FnMut(T) -> T, a: T, b: T, rel_tol: T, abs_tol: T) -> Result<Quadrature<T>> {
    const MAX_INTERVALS: usize = 4000;
    if a == b {
        return Ok(Quadrature {
            value: T::zero(),
            error: T::zero(),
            intervals: 0,
        });
    }
    let (v, e) = kronrod_15(&mut f, a, b);
    let mut parts = vec![(a, b, v, e)];
    let mut total = v;
    let mut total_err = e;
    let roundoff = T::lit(100.0) * T::epsilon();
    loop {
        let target = abs_tol.max(rel_tol * total.abs());
        if total_err <= target {
            break;
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap_or(std::cmp::Ordering::Equal))
            .expect("nonempty");
        let (lo, hi, pv, pe) = parts[idx];
        let mid = (lo + hi) * T::lit(0.5);
        if parts.len() >= MAX_INTERVALS || mid <= lo || mid >= hi || pe <= roundoff * pv.abs() {
            if total_err <= T::lit(1e3) * target {
                break;
            }
            return Err(Error::NotConverged {
                what: "adaptive Gauss-Kronrod quadrature",
                iterations: parts.len(),
            });
        }
        let (v1, e1) = kronrod_15(&mut f, lo, mid);
        let (v2, e2) = kronrod_15(&mut f, mid, hi);
        total = total - pv + v1 + v2;
        total_err = total_err - pe + e1 + e2;
        parts[idx] = (lo, mid, v1, e1);
        parts.push((mid, hi, v2, e2));
    }
    // re-sum to shed accumulated cancellation in the running totals
    let value = parts.iter().map(|p| p.2).sum();
    let error = parts.iter().map(|p| p.3).sum();
    Ok(Quadrature {
        value,
        error,
        intervals: parts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_is_exact_for_polynomials() {
        for n in [1usize, 2, 5, 16, 33] {
            let rule = GaussLegendre::<f64>::new(n);
            for deg in 0..2 * n {
                let got = rule.integrate(0.0, 1.0, |x| x.powi(deg as i32));
                let want = 1.0 / (deg as f64 + 1.0);
                assert!((got - want).abs() < 1e-14, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn weights_sum_to_two() {
        let s: f64 = GaussLegendre::<f64>::new(24).weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let s32: f32 = GaussLegendre::<f32>::new(8).weights.iter().sum();
        assert!((s32 - 2.0).abs() < 1e-5);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let q = adaptive(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, 1e-12, 0.0).unwrap();
        assert!((q.value - 2.0).abs() < 1e-10);
    }

    #[test]
    fn adaptive_smooth_oscillatory() {
        let q = adaptive(|x: f64| (10.0 * x).cos(), 0.0, 3.0, 1e-13, 0.0).unwrap();
        assert!((q.value - (30f64).sin() / 10.0).abs() < 1e-13);
    }

    #[test]
    fn panel_rule_integrates_piecewise() {
        let rule = PanelRule::<f64>::new(vec![0.0, 0.1, 0.5, 2.0], 10);
        assert_eq!(rule.nodes.len(), 30);
        let s: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x.exp()).sum();
        assert!((s - (2f64.exp() - 1.0)).abs() < 1e-13);
        assert_eq!(rule.panel[15], 1);
    }
}
