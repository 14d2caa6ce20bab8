//! Criterion benchmarks for the regionalization pipeline live in `benches/`.

use qregion_core::init::initial_solution;
use qregion_core::model::{Bqm, Sampler};
use qregion_core::seeding::SeedingConfig;
use qregion_core::spatial::{generate_grid, AttrDist};
use qregion_core::{AreaGraph, Partition};

/// A seeded grid with its initial partition.
pub fn instance(rows: usize, cols: usize, p: usize, seed: u64) -> (AreaGraph, Partition) {
    let g = generate_grid(rows, cols, seed, AttrDist::default()).expect("grid");
    let init = initial_solution(&g, &SeedingConfig::new(p, Sampler::exhaustive(), seed)).expect("initial solution");
    (g, init.partition)
}

/// Ring-shaped frustrated BQM over `n` variables.
pub fn ring_bqm(n: usize) -> Bqm {
    let mut b = Bqm::builder();
    for i in 0..n {
        let (a, c) = (format!("v{i}"), format!("v{}", (i + 1) % n));
        b.add_linear(&a, if i % 3 == 0 { -1.5 } else { 0.5 });
        b.add_quadratic(&a, &c, if i % 2 == 0 { 1.0 } else { -0.75 });
    }
    b.build_bqm()
}
