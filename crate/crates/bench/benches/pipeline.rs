use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use qregion_bench::{instance, ring_bqm};
use qregion_core::baseline::best_greedy_move;
use qregion_core::localopt::{movable_areas, optimize, OptimizeConfig};
use qregion_core::model::{solve_exhaustive, solve_sa, SaParams};
use qregion_core::seeding::{select_seeds, SeedingConfig};
use qregion_core::model::Sampler;

fn samplers(c: &mut Criterion) {
    let mut group = c.benchmark_group("samplers");
    for n in [12, 18, 22] {
        let m = ring_bqm(n);
        group.bench_with_input(BenchmarkId::new("exhaustive", n), &m, |b, m| {
            b.iter(|| solve_exhaustive(black_box(m)).unwrap())
        });
    }
    let params = SaParams { reads: 10, sweeps: 500, ..SaParams::default() };
    for n in [15, 100] {
        let m = ring_bqm(n);
        group.bench_with_input(BenchmarkId::new("sa", n), &m, |b, m| b.iter(|| solve_sa(black_box(m), &params)));
    }
    group.finish();
}

fn local_search(c: &mut Criterion) {
    let (g, part) = instance(5, 10, 10, 1);
    c.bench_function("movable_areas/50", |b| b.iter(|| movable_areas(&g, black_box(&part)).unwrap()));
    c.bench_function("greedy_move/50", |b| b.iter(|| best_greedy_move(&g, black_box(&part)).unwrap()));
    let cfg = OptimizeConfig { iterations: 1, ..OptimizeConfig::default() };
    c.bench_function("optimize_iteration/50", |b| b.iter(|| optimize(&g, part.clone(), &cfg).unwrap()));
}

fn seeding(c: &mut Criterion) {
    let (g, _) = instance(3, 4, 3, 2);
    let cfg = SeedingConfig::new(3, Sampler::exhaustive(), 0);
    c.bench_function("select_seeds/12", |b| b.iter(|| select_seeds(black_box(&g), &cfg).unwrap()));
}

criterion_group!(benches, samplers, local_search, seeding);
criterion_main!(benches);
