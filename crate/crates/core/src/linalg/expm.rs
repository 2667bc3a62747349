//! Matrix exponential by scaling and squaring with diagonal Padé approximants
//! of degree 3, 5, 7, 9 or 13.

use super::dense::CMatrix;
use super::lu::Lu;
use crate::error::Result;
use crate::scalar::{cr, Real};

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// `exp(A)` for a square complex matrix.
pub fn expm<T: Real>(a: &CMatrix<T>) -> Result<CMatrix<T>> {
    let n = a.rows();
    assert!(a.is_square(), "expm requires a square matrix");
    if n == 0 {
        return Ok(a.clone());
    }
    let norm = a.norm_1().as_f64();
    for &(m, theta) in &THETA {
        if norm <= theta {
            let coef: &[f64] = match m {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            let (u, v) = low_degree(a, coef);
            return pade_solve(&u, &v);
        }
    }
    let s = if norm > THETA_13 { (norm / THETA_13).log2().ceil() as i32 } else { 0 };
    let scaled = a.scale(cr(T::lit(2f64.powi(-s))));
    let (u, v) = degree_13(&scaled);
    let mut x = pade_solve(&u, &v)?;
    for _ in 0..s {
        x = x.matmul(&x);
    }
    Ok(x)
}

fn low_degree<T: Real>(a: &CMatrix<T>, b: &[f64]) -> (CMatrix<T>, CMatrix<T>) {
    let n = a.rows();
    let a2 = a.matmul(a);
    let mut powers = vec![CMatrix::identity(n), a2.clone()];
    while powers.len() * 2 < b.len() {
        let next = powers.last().unwrap().matmul(&a2);
        powers.push(next);
    }
    let mut u = CMatrix::zeros(n, n);
    let mut v = CMatrix::zeros(n, n);
    for (k, p) in powers.iter().enumerate() {
        v = v.add(&p.scale(cr(T::lit(b[2 * k]))));
        u = u.add(&p.scale(cr(T::lit(b[2 * k + 1]))));
    }
    (a.matmul(&u), v)
}

fn degree_13<T: Real>(a: &CMatrix<T>) -> (CMatrix<T>, CMatrix<T>) {
    let n = a.rows();
    let b = |k: usize| cr(T::lit(B13[k]));
    let ident = CMatrix::identity(n);
    let a2 = a.matmul(a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);
    let inner_u = a6.scale(b(13)).add(&a4.scale(b(11))).add(&a2.scale(b(9)));
    let u = a6
        .matmul(&inner_u)
        .add(&a6.scale(b(7)))
        .add(&a4.scale(b(5)))
        .add(&a2.scale(b(3)))
        .add(&ident.scale(b(1)));
    let u = a.matmul(&u);
    let inner_v = a6.scale(b(12)).add(&a4.scale(b(10))).add(&a2.scale(b(8)));
    let v = a6
        .matmul(&inner_v)
        .add(&a6.scale(b(6)))
        .add(&a4.scale(b(4)))
        .add(&a2.scale(b(2)))
        .add(&ident.scale(b(0)));
    (u, v)
}

fn pade_solve<T: Real>(u: &CMatrix<T>, v: &CMatrix<T>) -> Result<CMatrix<T>> {
    let p = v.add(u);
    let q = v.sub(u);
    Ok(Lu::new(&q)?.solve(&p))
}
