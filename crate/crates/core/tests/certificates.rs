use fracreset_core::models::{close_loop, ClosedLoopResetSystem, ElementKind, ResetElement, StateSpaceModel};
use fracreset_core::numcore::{poly_mul, RationalFunction};
use fracreset_core::stability::{
    beta_interval, flow_generator, h_beta, lyapunov_check, re_positive, spr_check, stability_report, Certificate,
    FrequencyGrid, LyapunovVerdict, StabilityOptions,
};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn integrator() -> StateSpaceModel {
    StateSpaceModel::from_transfer_function(&[1.0], &[1.0, 0.0], 1.0).unwrap()
}

fn folded_plant() -> StateSpaceModel {
    StateSpaceModel::from_transfer_function(&[1.0, 1.0], &[1.0, 0.2, 0.0], 1.0).unwrap()
}

fn loop_with(plant: &StateSpaceModel, kind: ElementKind) -> ClosedLoopResetSystem {
    close_loop(plant, None, &ResetElement::new(kind).unwrap()).unwrap()
}

#[test]
fn unit_order_generator_is_the_loop_matrix() {
    let sys = loop_with(&folded_plant(), ElementKind::Fore { gain: 1.0, pole: 1.0 });
    assert_eq!(&flow_generator(&sys).unwrap(), sys.a());
}

#[test]
fn numerator_is_affine_in_beta() {
    let sys = loop_with(&integrator(), ElementKind::Fci { order: 0.5 });
    let h = h_beta(&sys, 1.0).unwrap();
    let (n0, n1) = (h.at(0.0).num, h.at(1.0).num);
    for &beta in &[-1.3, 0.0, 0.25, 2.0] {
        let nb = h.at(beta).num;
        for k in 0..nb.len() {
            assert_eq!(nb[k], n0[k] + beta * h.num1[k]);
            assert!((nb[k] - (n0[k] + beta * (n1[k] - n0[k]))).abs() < 1e-15);
        }
    }
}

#[test]
fn interlacing_family_is_spr() {
    let mut rng = StdRng::seed_from_u64(17);
    let grid = FrequencyGrid::default();
    let dense = FrequencyGrid::log(1e-4, 1e4, 20_000).unwrap();
    for _ in 0..20 {
        let n = rng.gen_range(1..=4);
        // 0 < p1 < z1 < p2 < z2 < ... < pn
        let mut cuts: Vec<f64> = (0..2 * n - 1).map(|_| rng.gen_range(0.05..20.0)).collect();
        cuts.sort_by(f64::total_cmp);
        let mut num = vec![1.0];
        let mut den = vec![1.0];
        for (i, &c) in cuts.iter().enumerate() {
            if i % 2 == 0 {
                den = poly_mul(&den, &[1.0, c]);
            } else {
                num = poly_mul(&num, &[1.0, c]);
            }
        }
        let gain = rng.gen_range(0.1..10.0);
        num.iter_mut().for_each(|c| *c *= gain);
        let h = RationalFunction::new(num, den).unwrap();
        assert!(spr_check(&h, &grid).unwrap().is_spr);
        for &w in dense.omegas() {
            assert!(h.eval(Complex64::new(0.0, w)).unwrap().re >= 0.0);
        }
        assert!(re_positive(&h, &grid).unwrap());
    }
}

#[test]
fn interval_endpoints_survive_grid_refinement() {
    let sys = loop_with(&integrator(), ElementKind::Fci { order: 0.5 });
    let h = h_beta(&sys, 1.0).unwrap();
    let coarse = beta_interval(&h, -2.0, 2.0, &FrequencyGrid::default()).unwrap().widest().unwrap();
    let fine = beta_interval(&h, -2.0, 2.0, &FrequencyGrid::log(1e-4, 1e4, 4000).unwrap())
        .unwrap()
        .widest()
        .unwrap();
    assert!((coarse[0] - fine[0]).abs() < 0.01 && (coarse[1] - fine[1]).abs() < 0.01);
}

#[test]
fn every_beta_in_the_interval_passes() {
    let sys = loop_with(&folded_plant(), ElementKind::Fci { order: 0.5 });
    let h = h_beta(&sys, 1.0).unwrap();
    let grid = FrequencyGrid::default();
    let iv = beta_interval(&h, -2.0, 2.0, &grid).unwrap();
    let [lo, hi] = iv.widest().unwrap();
    for k in 0..=20 {
        let beta = lo + (hi - lo) * k as f64 / 20.0;
        assert!(re_positive(&h.at(beta), &grid).unwrap(), "beta = {beta}");
    }
}

#[test]
fn reports_for_worked_loops() {
    let opts = StabilityOptions::default();
    let ex2 = stability_report(&loop_with(&integrator(), ElementKind::Fci { order: 0.5 }), &opts).unwrap();
    assert_eq!(ex2.certificate, Certificate::Certified);
    assert!(ex2.warnings.is_empty(), "{:?}", ex2.warnings);

    let ci = stability_report(&loop_with(&folded_plant(), ElementKind::Ci), &opts).unwrap();
    assert_eq!(ci.certificate, Certificate::NotCertified);
    assert!(ci.beta_interval.is_none());

    let fci = stability_report(&loop_with(&folded_plant(), ElementKind::Fci { order: 0.5 }), &opts).unwrap();
    assert_eq!(fci.certificate, Certificate::Certified);
    let [_, hi] = fci.beta_interval.unwrap();
    assert!((hi - 0.62).abs() < 0.05);
}

#[test]
fn lyapunov_probe_is_consistent_with_frequency_test() {
    // A certified probe on a loop whose frequency scan is empty would be a
    // contradiction; an inconclusive probe next to a certified scan is allowed.
    let grid = FrequencyGrid::default();
    for (plant, kind) in [
        (integrator(), ElementKind::Fci { order: 0.5 }),
        (folded_plant(), ElementKind::Fore { gain: 1.0, pole: 1.0 }),
        (folded_plant(), ElementKind::Fci { order: 0.5 }),
        (folded_plant(), ElementKind::Ci),
    ] {
        let sys = loop_with(&plant, kind);
        let probe = lyapunov_check(&sys).unwrap();
        let scan_nonempty = h_beta(&sys, 1.0)
            .ok()
            .map(|h| !beta_interval(&h, -2.0, 2.0, &grid).unwrap().is_empty())
            .unwrap_or(false);
        if probe.verdict == LyapunovVerdict::Certified {
            assert!(scan_nonempty, "{kind:?}");
        }
        if matches!(kind, ElementKind::Ci) {
            assert_eq!(probe.verdict, LyapunovVerdict::NotHurwitz);
        }
    }
}
