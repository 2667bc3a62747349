use gribov_core::export::{format_number, trace_report_table};
use gribov_core::kernel::{self, discretize, discretize_certified, GridSpec, KernelKind};
use gribov_core::linalg::{CMatrix, Lu};
use gribov_core::operator::{build_displaced_oscillator, build_gribov_matrix, BasisRange, OperatorParams};
use gribov_core::semigroup::{gibbs_trace_norm, matrix_exponential, propagate_cauchy, schatten_norm};
use gribov_core::spectrum::{all_eigenvalues, biorthogonal_system, compute_spectrum};
use gribov_core::trace::{regularized_partial_sums, ContourKind, TraceDim};
use num_complex::Complex64;
use proptest::prelude::*;

fn params(lpp: f64, lp: f64, mu: f64, l: f64) -> OperatorParams<f64> {
    OperatorParams::new(lpp, lp, mu, l).unwrap()
}

fn lowest(p: OperatorParams<f64>, dim: usize) -> f64 {
    let m = build_gribov_matrix(p, BasisRange::new(1, dim).unwrap()).unwrap();
    compute_spectrum(&m, 4).unwrap().lowest().unwrap().re
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn matrix_entries_follow_the_ladder_formulas(
        lpp in 0.0..2.0f64, lp in 0.0..2.0f64, mu in 0.1..3.0f64, l in -2.0..2.0f64,
        start in 0usize..2, dim in 2usize..40,
    ) {
        let m = build_gribov_matrix(params(lpp, lp, mu, l), BasisRange::new(start, dim).unwrap()).unwrap();
        for i in 0..dim {
            let n = (start + i) as f64;
            let d = lpp * n * (n - 1.0) * (n - 2.0) + lp * n * (n - 1.0) + mu * n;
            prop_assert!((m.get(i, i) - Complex64::new(d, 0.0)).norm() <= 1e-12 * d.abs().max(1.0));
            if i + 1 < dim {
                let off = Complex64::new(0.0, l * (n * n * (n + 1.0)).sqrt());
                prop_assert_eq!(m.get(i, i + 1), m.get(i + 1, i));
                prop_assert!((m.get(i, i + 1) - off).norm() <= 1e-12 * off.norm().max(1.0));
            }
            if i + 2 < dim {
                prop_assert_eq!(m.get(i, i + 2), Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn uncoupled_spectrum_is_the_diagonal(lp in 0.0..1.0f64, mu in 0.1..3.0f64, dim in 2usize..30) {
        let m = build_gribov_matrix(params(0.5, lp, mu, 0.0), BasisRange::new(1, dim).unwrap()).unwrap();
        let ev = all_eigenvalues(&m).unwrap();
        for (k, z) in ev.iter().enumerate() {
            let n = (k + 1) as f64;
            let want = 0.5 * n * (n - 1.0) * (n - 2.0) + lp * n * (n - 1.0) + mu * n;
            prop_assert!((z - want).norm() <= 1e-9 * want);
        }
    }

    #[test]
    fn displaced_oscillator_shift(omega in 0.5..2.0f64, c in -1.0..1.0f64) {
        let m = build_displaced_oscillator(omega, c, BasisRange::new(0, 120).unwrap()).unwrap();
        let ev = all_eigenvalues(&m).unwrap();
        for (n, z) in ev.iter().take(6).enumerate() {
            prop_assert!((z.re - (omega * n as f64 - c * c / omega)).abs() < 1e-9);
        }
    }

    #[test]
    fn eigenvector_expansion_matches_exponential(l in 0.05..0.6f64, t in 0.0..2.0f64, seed in 0u32..1000) {
        let m = build_gribov_matrix(params(0.0, 0.0, 1.0, l), BasisRange::new(1, 24).unwrap()).unwrap();
        let sys = biorthogonal_system(&m, 24).unwrap();
        let phi0: Vec<Complex64> = (0..24)
            .map(|k| Complex64::new(((seed as usize + 3 * k) % 7) as f64, (k % 3) as f64) / (1.0 + (k * k) as f64))
            .collect();
        let u = propagate_cauchy(&sys, &sys.eigenvalues, &phi0, t).unwrap();
        let v = matrix_exponential(&m, t).unwrap().matvec(&phi0);
        let err: f64 = u.iter().zip(&v).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let norm: f64 = v.iter().map(|b| b.norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-9 * norm.max(1e-300));
    }

    #[test]
    fn schatten_norms_of_diagonals(d in prop::collection::vec(-5.0..5.0f64, 1..12), p in 1.0..4.0f64) {
        let diag: Vec<Complex64> = d.iter().map(|&x| Complex64::new(x, 0.5 * x)).collect();
        let want = diag.iter().map(|z| z.norm().powf(p)).sum::<f64>().powf(1.0 / p);
        let got = schatten_norm(&CMatrix::from_diagonal(&diag), p).unwrap();
        prop_assert!((got - want).abs() <= 1e-12 * want.max(1.0));
    }
}

#[test]
fn kernel_radius_is_reciprocal_ground_state() {
    for (kind, p) in [
        (KernelKind::MuLambda, params(0.0, 0.0, 1.0, 1.0)),
        (KernelKind::MuLambda, params(0.0, 0.0, 2.0, 0.5)),
        (KernelKind::LambdaPrime, params(0.0, 0.2, 1.0, 1.0)),
        (KernelKind::LambdaPrime, params(0.0, 1.0, 2.0, 1.0)),
    ] {
        let op = discretize_certified(kind, &p, &GridSpec::new(256), 1e-8).unwrap();
        let omega = kernel::spectral_radius(&op).unwrap().radius;
        let sigma0 = lowest(p, 256);
        assert!((omega * sigma0 - 1.0).abs() < 1e-8, "{kind:?} {p:?}: {omega} * {sigma0}");
    }
}

#[test]
fn fine_grid_regression() {
    let p = params(0.0, 0.0, 1.0, 1.0);
    let op = discretize(KernelKind::MuLambda, &p, &GridSpec::new(2048)).unwrap();
    let r = kernel::spectral_radius(&op).unwrap().radius;
    assert!((r - 0.548016294368).abs() < 1e-11, "{r}");
    let q = params(0.0, 1.0, 2.0, 1.0);
    let op = discretize(KernelKind::LambdaPrime, &q, &GridSpec::new(2048)).unwrap();
    assert!(op.grid.nodes.iter().all(|y| y.is_finite()));
    assert!(kernel::hs_norm(&op).is_finite());
}

/// `f(y) = sum_k c_k (-i y)^(k+1) / sqrt((k+1)!)`.
fn bargmann_eval(c: &[Complex64], y: f64) -> Complex64 {
    let z = Complex64::new(0.0, -y);
    let (mut s, mut zn, mut fact) = (Complex64::new(0.0, 0.0), z, 1.0f64);
    for (k, &ck) in c.iter().enumerate() {
        fact *= (k + 1) as f64;
        s += ck * zn / fact.sqrt();
        zn *= z;
    }
    s
}

#[test]
fn inverse_kernel_solves_the_coefficient_system() {
    for (kind, p) in [
        (KernelKind::MuLambda, params(0.0, 0.0, 1.0, 1.0)),
        (KernelKind::LambdaPrime, params(0.0, 0.5, 1.0, 0.7)),
    ] {
        let dim = 64;
        let m = build_gribov_matrix(p, BasisRange::new(1, dim).unwrap()).unwrap();
        let mut rhs = vec![Complex64::new(0.0, 0.0); dim];
        for (k, r) in rhs.iter_mut().take(5).enumerate() {
            *r = Complex64::new(1.0, -(k as f64)) / (k + 1) as f64;
        }
        let phi = Lu::new(&m.to_dense()).unwrap().solve_vec(&rhs);
        let op = discretize(kind, &p, &GridSpec::new(128)).unwrap();
        let samples: Vec<Complex64> = op.grid.nodes.iter().map(|&y| bargmann_eval(&rhs, y)).collect();
        let got = kernel::inverse_apply(&op, &samples).unwrap();
        let (mut num, mut den) = (0.0, 0.0);
        // the 64-term reference series is only accurate on a bounded range
        for (i, &y) in op.grid.nodes.iter().enumerate().filter(|(_, &y)| y <= 2.5) {
            let want = bargmann_eval(&phi, y);
            let w = op.grid.quad_weights[i] * op.grid.weight_values[i];
            num += w * (got[i] - want).norm_sqr();
            den += w * want.norm_sqr();
        }
        assert!((num / den).sqrt() < 1e-5, "{kind:?}: {}", (num / den).sqrt());
    }
}

#[test]
fn gibbs_norm_is_the_exponential_sum() {
    for t in [1e-3, 0.01, 0.3, 1.0] {
        let want: f64 = (1..4000).map(|n| n as f64).map(|n| (-t * n * (n - 1.0) * (n - 2.0)).exp()).sum();
        let got = gibbs_trace_norm(t, 1, 2048).unwrap();
        assert!((got - want).abs() < 1e-10 * want, "t={t}: {got} vs {want}");
    }
}

#[test]
fn diagonal_perturbation_has_zero_regularized_sum() {
    // with lambda = 0 the eigenvalues shift by exactly mu n, which the
    // first correction removes; the higher ones have no residue
    let r = regularized_partial_sums(&params(1.0, 0.0, 0.7, 0.0), &[4, 9], TraceDim::Fixed(48), ContourKind::MidpointGap, None)
        .unwrap();
    for row in &r.rows {
        let raw: f64 = (1..=row.m).map(|n| 0.7 * n as f64).sum();
        assert!((row.raw_sum - raw).abs() < 1e-12 * raw);
        assert!(row.regularized_re.abs() < 1e-9 * raw, "{row:?}");
    }
}

#[test]
fn trace_table_cells_parse_back() {
    let r = regularized_partial_sums(&params(1.0, 0.0, 1.0, 0.5), &[5], TraceDim::Proportional(4), ContourKind::MidpointGap, None)
        .unwrap();
    let csv = trace_report_table(&r).to_csv_string();
    let line = csv.lines().nth(1).unwrap();
    let cells: Vec<&str> = line.split(',').collect();
    assert_eq!(cells.len(), 3 + 8 + 2);
    assert_eq!(cells[0], "5");
    assert_eq!(cells[2].parse::<f64>().unwrap(), r.rows[0].raw_sum);
    assert_eq!(cells[12], format_number(r.rows[0].regularized_im));
}

#[test]
fn single_precision_pipeline() {
    let p = OperatorParams::<f32>::new(0.0, 0.0, 1.0, 0.5).unwrap();
    let m = build_gribov_matrix(p, BasisRange::new(1, 48).unwrap()).unwrap();
    let s32 = compute_spectrum(&m, 2).unwrap().lowest().unwrap().re;
    let s64 = lowest(params(0.0, 0.0, 1.0, 0.5), 48);
    assert!((s32 as f64 - s64).abs() < 1e-4 * s64, "{s32} vs {s64}");
}
