use std::f64::consts::PI;

use criterion::{criterion_group, criterion_main, Criterion};
use fracreset_bench::example_loop;
use fracreset_core::describing::numerical_df;
use fracreset_core::models::{ElementKind, ResetElement};
use fracreset_core::simreset::{simulate, SimulationConfig};
use fracreset_core::stability::{beta_interval, h_beta, FrequencyGrid};

fn simulation(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate_10s");
    g.sample_size(10);
    for (label, kind) in [("ci", ElementKind::Ci), ("fci_0.5", ElementKind::Fci { order: 0.5 })] {
        let sys = example_loop(kind);
        let cfg = SimulationConfig {
            horizon: 10.0,
            ..SimulationConfig::default()
        };
        g.bench_function(label, |b| b.iter(|| simulate(&sys, &cfg).unwrap()));
    }
    g.finish();
}

fn certificate(c: &mut Criterion) {
    let sys = example_loop(ElementKind::Fci { order: 0.5 });
    let grid = FrequencyGrid::default();
    c.bench_function("h_beta_fci", |b| b.iter(|| h_beta(&sys, 1.0).unwrap()));
    let h = h_beta(&sys, 1.0).unwrap();
    let mut g = c.benchmark_group("beta_interval");
    g.sample_size(10);
    g.bench_function("fci", |b| b.iter(|| beta_interval(&h, -2.0, 2.0, &grid).unwrap()));
    g.finish();
}

fn describing(c: &mut Criterion) {
    let el = ResetElement::new(ElementKind::Fci { order: 0.5 }).unwrap();
    let mut g = c.benchmark_group("numerical_df");
    g.sample_size(10);
    g.bench_function("fci_0.5_omega_1", |b| b.iter(|| numerical_df(&el, 1.0, 1.0, 2.0 * PI / 2000.0).unwrap()));
    g.finish();
}

criterion_group!(benches, simulation, certificate, describing);
criterion_main!(benches);
