use fracreset_core::numcore::{
    eig, eval_rational, is_positive_definite, lyapunov_residual, lyapunov_solve, matrix_fractional_power,
    principal_power, ComplexMatrix, RationalFunction,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn square(max_n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (2..=max_n).prop_flat_map(|n| {
        prop::collection::vec(-5.0f64..5.0, n * n).prop_map(move |v| DMatrix::from_row_slice(n, n, &v))
    })
}

/// Shifts `m` so that its rightmost eigenvalue sits at real part `-margin`.
fn hurwitz(m: DMatrix<f64>, margin: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let e = eig(&ComplexMatrix::from_real(&m).unwrap()).unwrap();
    let shift = e.values[0].re + margin;
    m - DMatrix::identity(n, n) * shift
}

fn real_eigs(m: &DMatrix<f64>) -> Vec<Complex64> {
    eig(&ComplexMatrix::from_real(m).unwrap()).unwrap().values
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn eig_reconstructs(m in square(8)) {
        let cm = ComplexMatrix::from_real(&m).unwrap();
        let e = eig(&cm).unwrap();
        prop_assert!(e.relative_residual(&cm) < 1e-9);
        for w in e.values.windows(2) {
            prop_assert!(w[0].re >= w[1].re - 1e-9 * (1.0 + w[0].norm()));
        }
    }

    #[test]
    fn fractional_power_maps_spectrum(m in square(6), order in 0.05f64..1.0) {
        let a = hurwitz(m, 0.5);
        let g = matrix_fractional_power(&ComplexMatrix::from_real(&a).unwrap(), order).unwrap();
        let mapped: Vec<Complex64> = real_eigs(&a)
            .into_iter()
            .map(|l| -(-l).powf(1.0 / (2.0 - order)))
            .collect();
        let got = eig(&g).unwrap().values;
        for mu in &mapped {
            let best = got.iter().map(|g| (g - mu).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(best < 1e-9 * mu.norm().max(1.0), "missing {mu}, nearest at {best:e}");
        }
    }

    #[test]
    fn unit_order_is_exact(m in square(6)) {
        let a = hurwitz(m, 0.1);
        let cm = ComplexMatrix::from_real(&a).unwrap();
        prop_assert_eq!(matrix_fractional_power(&cm, 1.0).unwrap(), cm);
    }

    #[test]
    fn lyapunov_solution_is_accurate(m in square(6)) {
        let a = hurwitz(m, 0.2);
        let n = a.nrows();
        let q = DMatrix::identity(n, n);
        let p = lyapunov_solve(&a, &q).unwrap();
        let scale = p.abs().column_sum().max().max(1.0);
        prop_assert!(lyapunov_residual(&a, &p, &q) < 1e-9 * scale);
        prop_assert!(is_positive_definite(&p));
    }

    #[test]
    fn rational_matches_direct_division(
        num in prop::collection::vec(-3.0f64..3.0, 1..5),
        den_tail in prop::collection::vec(-3.0f64..3.0, 4..6),
        pts in prop::collection::vec((-4.0f64..4.0, -4.0f64..4.0), 1000),
    ) {
        let mut den = vec![1.0];
        den.extend(den_tail);
        let h = RationalFunction::new(num.clone(), den.clone()).unwrap();
        let powers = |c: &[f64], s: Complex64| -> Complex64 {
            let d = c.len() - 1;
            c.iter().enumerate().map(|(k, &ck)| ck * s.powu((d - k) as u32)).sum()
        };
        // Magnitude of the summed terms, the scale of rounding in either scheme.
        let bulk = |c: &[f64], r: f64| -> f64 {
            let d = c.len() - 1;
            c.iter().enumerate().map(|(k, &ck)| ck.abs() * r.powi((d - k) as i32)).sum()
        };
        for (re, im) in pts {
            let s = Complex64::new(re, im);
            let d = powers(&den, s);
            if d.norm() < 1e-3 {
                continue;
            }
            let direct = powers(&num, s) / d;
            let got = eval_rational(&h, s).unwrap();
            let scale = (bulk(&num, s.norm()) + direct.norm() * bulk(&den, s.norm())) / d.norm();
            prop_assert!((got - direct).norm() <= 1e-12 * scale, "s = {s}: {got} vs {direct}");
        }
    }
}

#[test]
fn square_root_exponent_example() {
    let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -8.0]));
    let cm = ComplexMatrix::from_real(&a).unwrap();
    assert_eq!(matrix_fractional_power(&cm, 1.0).unwrap(), cm);
    let half = principal_power(&cm, 0.5).unwrap().to_real().unwrap();
    assert!((half[(0, 0)] + 1.0).abs() < 1e-12);
    assert!((half[(1, 1)] + 8f64.sqrt()).abs() < 1e-12);
}

#[test]
fn lyapunov_jordan_example() {
    let a = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -1.0]);
    let p = lyapunov_solve(&a, &DMatrix::identity(2, 2)).unwrap();
    let want = DMatrix::from_row_slice(2, 2, &[0.5, 0.25, 0.25, 0.75]);
    assert!((p - want).amax() < 1e-12);
}
