//! Oscillatory quadrature throughput: composition and time slicing.

use criterion::{black_box, criterion_group, criterion_main, Criterion};

use mixedpath_core::hamiltonian::Hamiltonian;
use mixedpath_core::reference::{
    compose_propagators, free_k_complex, lattice_propagator, microcanonical_transform,
    MicrocanonicalSpec, QuadratureSpec,
};

fn bench_compose(c: &mut Criterion) {
    let quad = QuadratureSpec::default();
    let k =
        |qa: f64, qb: f64, tau: mixedpath_core::Complex64| free_k_complex(1.0, 1.0, qb - qa, tau);
    c.bench_function("compose 2^14 points", |b| {
        b.iter(|| compose_propagators(k, 0.0, 1.0, 2.0, 0.0, black_box(0.5), &quad).unwrap())
    });
}

fn bench_lattice_propagator(c: &mut Criterion) {
    let h = Hamiltonian::free(1.0).unwrap();
    let quad = QuadratureSpec {
        window: 8.0,
        points: 256,
        ..QuadratureSpec::default()
    };
    c.bench_function("lattice propagator 3 slices 256 pts", |b| {
        b.iter(|| lattice_propagator(&h, 1.0, 0.0, black_box(1.0), 1.0, 3, &quad).unwrap())
    });
}

fn bench_microcanonical(c: &mut Criterion) {
    let spec = MicrocanonicalSpec {
        q_points: 128,
        t_points: 128,
        ..MicrocanonicalSpec::default()
    };
    c.bench_function("microcanonical transform 128", |b| {
        b.iter(|| microcanonical_transform(black_box(&spec), &[1.0]).unwrap())
    });
}

criterion_group!(
    benches,
    bench_compose,
    bench_lattice_propagator,
    bench_microcanonical
);
criterion_main!(benches);
