use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use willmore_core::flow::{discrete_energy, energy_gradient};
use willmore_core::{perturbed_sphere, PerturbationSpec};

fn gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("energy_gradient");
    for level in [3, 4, 5] {
        let mesh = perturbed_sphere(&PerturbationSpec { lmax: 4, seed: 7, amplitude: 0.06, coeffs: None, level })
            .unwrap()
            .mesh;
        group.bench_with_input(BenchmarkId::new("gradient", level), &mesh, |b, m| {
            b.iter(|| energy_gradient(black_box(m)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("energy", level), &mesh, |b, m| {
            b.iter(|| discrete_energy(black_box(m)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, gradient);
criterion_main!(benches);
