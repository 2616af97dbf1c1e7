use fracreset_core::fode::{gl_step, gl_weights, GlState};
use fracreset_core::models::{
    assemble_closed_loop, augment_integer_order, on_reset_surface, ResetRule, StateSpaceModel,
};
use fracreset_core::numcore::{eig, ComplexMatrix};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn gamma_weight(order: f64, i: usize) -> f64 {
    let i = i as f64;
    libm::tgamma(i - order) / (libm::tgamma(-order) * libm::tgamma(i + 1.0))
}

#[test]
fn weights_match_gamma_formula() {
    for &order in &[0.1, 0.25, 0.5, 0.75, 0.9, 0.999] {
        let w = gl_weights(order, 101).unwrap();
        assert_eq!(w.as_slice()[0], 1.0);
        for i in 1..=100 {
            let want = gamma_weight(order, i);
            let got = w.as_slice()[i];
            assert!((got - want).abs() < 1e-12, "order {order}, i {i}: {got} vs {want}");
        }
    }
}

#[test]
fn weight_tail_sums_to_zero() {
    let w = gl_weights(0.5, 10_001).unwrap();
    let sum: f64 = w.as_slice().iter().sum();
    assert!(sum.abs() < 1e-2, "partial sum {sum}");
}

fn random_model(rng: &mut StdRng, n: usize, order: f64) -> StateSpaceModel {
    let mut gen = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.gen_range(-2.0..2.0));
    StateSpaceModel::new(gen(n, n), gen(n, 1), gen(1, n), order).unwrap()
}

#[test]
fn unit_order_is_forward_euler_bit_for_bit() {
    let mut rng = StdRng::seed_from_u64(7);
    for n in 1..=5 {
        let model = random_model(&mut rng, n, 1.0);
        let h = 1e-3;
        let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut gl = GlState::new(1.0, h, &x0, None).unwrap();
        let mut euler = x0.clone();
        for k in 0..2000 {
            let u = (k as f64 * h).sin();
            let got = gl_step(&model, &mut gl, u).unwrap();
            euler = (0..n)
                .map(|i| {
                    let mut acc = 0.0;
                    for (j, xj) in euler.iter().enumerate() {
                        acc += model.a()[(i, j)] * xj;
                    }
                    euler[i] + h * (acc + model.b()[(i, 0)] * u)
                })
                .collect();
            assert_eq!(got, euler, "step {k}");
        }
    }
}

fn integrator_step_response(order: f64, h: f64, t: f64) -> f64 {
    let model = StateSpaceModel::new(
        DMatrix::zeros(1, 1),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, 1.0),
        order,
    )
    .unwrap();
    let mut gl = GlState::new(order, h, &[0.0], None).unwrap();
    let steps = (t / h).round() as usize;
    let mut x = vec![0.0];
    for _ in 0..steps {
        x = gl_step(&model, &mut gl, 1.0).unwrap();
    }
    x[0]
}

#[test]
fn half_integrator_step_response() {
    let got = integrator_step_response(0.5, 1e-4, 1.0);
    let want = 2.0 / std::f64::consts::PI.sqrt();
    assert!((got - want).abs() < 1e-2, "{got} vs {want}");
}

#[test]
fn gl_scheme_is_first_order() {
    for &order in &[0.5, 0.8] {
        let exact = 1.0 / libm::tgamma(1.0 + order);
        let e1 = (integrator_step_response(order, 1e-2, 1.0) - exact).abs();
        let e2 = (integrator_step_response(order, 5e-3, 1.0) - exact).abs();
        let ratio = e2 / e1;
        assert!((0.4..=0.6).contains(&ratio), "order {order}: ratio {ratio}");
    }
}

fn stable_integer_model(rng: &mut StdRng) -> StateSpaceModel {
    let n = rng.gen_range(1..=4);
    let m = random_model(rng, n, 1.0);
    let e = eig(&ComplexMatrix::from_real(m.a()).unwrap()).unwrap();
    let shift = e.values[0].re + 0.3;
    let a = m.a() - DMatrix::identity(n, n) * shift;
    StateSpaceModel::new(a, m.b().clone(), m.c().clone(), 1.0).unwrap()
}

#[test]
fn augmentation_preserves_frequency_response() {
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..50 {
        let sys = stable_integer_model(&mut rng);
        let aug = augment_integer_order(&sys, 0.5).unwrap();
        for k in 0..20 {
            let w = 10f64.powf(-2.0 + 4.0 * k as f64 / 19.0);
            let a = sys.frequency_response(w).unwrap();
            let b = aug.frequency_response(w).unwrap();
            assert!((a - b).norm() < 1e-8, "ω = {w}: {a} vs {b}");
        }
    }
}

#[test]
fn augmented_transfer_uses_fractional_variable() {
    let mut rng = StdRng::seed_from_u64(3);
    let sys = stable_integer_model(&mut rng);
    let aug = augment_integer_order(&sys, 0.25).unwrap();
    assert_eq!(aug.dim(), 4 * sys.dim());
    let s = Complex64::new(0.3, 1.7);
    let d = (sys.transfer_at(s).unwrap() - aug.transfer_at(s).unwrap()).norm();
    assert!(d < 1e-8);
}

#[test]
fn closed_loop_blocks_round_trip() {
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..20 {
        let (np, nc, nr) = (rng.gen_range(1..4), rng.gen_range(1..3), rng.gen_range(1..3));
        let plant = random_model(&mut rng, np, 1.0);
        let lin = random_model(&mut rng, nc, 1.0);
        let reset = random_model(&mut rng, nr, 1.0);
        let rule = ResetRule::new(nr - 1, 1);
        let sys = assemble_closed_loop(&plant, Some(&lin), &reset, &rule).unwrap();
        let a = sys.a();
        let (c0, r0) = (np, np + nc);
        assert_eq!(a.view((0, 0), (np, np)).clone_owned(), *plant.a());
        assert_eq!(a.view((c0, c0), (nc, nc)).clone_owned(), *lin.a());
        assert_eq!(a.view((r0, r0), (nr, nr)).clone_owned(), *reset.a());
        assert_eq!(a.view((0, c0), (np, nc)).clone_owned(), plant.b() * lin.c());
        assert_eq!(a.view((c0, r0), (nc, nr)).clone_owned(), lin.b() * reset.c());
        assert_eq!(a.view((r0, 0), (nr, np)).clone_owned(), -(reset.b() * plant.c()));
        assert_eq!(a.view((0, r0), (np, nr)).amax(), 0.0);
        assert_eq!(a.view((c0, 0), (nc, np)).amax(), 0.0);
        assert_eq!(a.view((r0, c0), (nr, nc)).amax(), 0.0);
        let ar = sys.reset_matrix();
        assert_eq!(ar * ar, ar.clone());
        assert_eq!(sys.reset_states(), &[np + nc + nr - 1]);
    }
}

proptest! {
    #[test]
    fn surface_ignores_free_states(
        x in prop::collection::vec(-3.0f64..3.0, 5),
        factor in 1.0f64..2.0,
        tol in 1e-9f64..1e-3,
    ) {
        let plant = StateSpaceModel::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -0.5]),
            DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            1.0,
        ).unwrap();
        let lin = StateSpaceModel::new(
            DMatrix::from_element(1, 1, -2.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            1.0,
        ).unwrap();
        let reset = StateSpaceModel::new(
            DMatrix::identity(2, 2) * -1.0,
            DMatrix::from_column_slice(2, 1, &[1.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            1.0,
        ).unwrap();
        let sys = assemble_closed_loop(&plant, Some(&lin), &reset, &ResetRule::new(1, 1)).unwrap();
        let mut x = x;
        x[0] = 0.5 * tol;
        let before = on_reset_surface(&sys, &x, tol);
        // States 1 (plant velocity), 2 (linear controller) and 3 (non-reset
        // part of the reset controller) enter neither clause.
        let mut scaled = x.clone();
        for i in [1, 2, 3] {
            scaled[i] *= factor;
        }
        prop_assert_eq!(before, on_reset_surface(&sys, &scaled, tol));
    }
}
