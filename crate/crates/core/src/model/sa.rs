use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Bqm, SampleResult};
use crate::derive_seed;

/// Simulated-annealing parameters. Unset temperatures are derived from the
/// model: `t_hot = max |coef|`, `t_cold = 1e-3 · min nonzero |coef|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaParams {
    pub reads: usize,
    pub sweeps: usize,
    pub t_hot: Option<f64>,
    pub t_cold: Option<f64>,
    pub rng_seed: u64,
}

impl Default for SaParams {
    fn default() -> Self {
        Self {
            reads: 50,
            sweeps: 1000,
            t_hot: None,
            t_cold: None,
            rng_seed: 0,
        }
    }
}

impl SaParams {
    pub fn with_seed(self, rng_seed: u64) -> Self {
        Self { rng_seed, ..self }
    }

    fn schedule(&self, m: &Bqm) -> Vec<f64> {
        let hot = self
            .t_hot
            .unwrap_or_else(|| m.objective.max_abs_coefficient())
            .max(f64::MIN_POSITIVE);
        let cold = self
            .t_cold
            .unwrap_or_else(|| 1e-3 * m.objective.min_nonzero_abs_coefficient().unwrap_or(1.0))
            .clamp(f64::MIN_POSITIVE, hot);
        let sweeps = self.sweeps.max(1);
        if sweeps == 1 {
            return vec![cold];
        }
        let ratio = (cold / hot).powf(1.0 / (sweeps - 1) as f64);
        (0..sweeps).map(|k| hot * ratio.powi(k as i32)).collect()
    }
}

/// Best assignment over `reads` independent single-flip Metropolis chains,
/// each starting from all-zeros on a geometric cooling schedule.
///
/// Read `k` draws from its own stream seeded by `(rng_seed, k)`, so the
/// result does not depend on how reads are scheduled across threads. Ties
/// between reads go to the lowest read index.
pub fn solve_sa(m: &Bqm, params: &SaParams) -> SampleResult {
    let n = m.num_variables();
    if n == 0 {
        return SampleResult {
            assignment: Vec::new(),
            energy: m.objective.offset,
            feasible: true,
        };
    }
    let schedule = params.schedule(m);
    let adj = m.objective.adjacency();
    let reads = params.reads.max(1);

    let runs: Vec<(f64, Vec<bool>)> = (0..reads)
        .into_par_iter()
        .map(|read| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(params.rng_seed, read as u64));
            let x = anneal(m, &adj, &schedule, &mut rng);
            (m.energy(&x), x)
        })
        .collect();

    let (energy, assignment) = runs
        .into_iter()
        .reduce(|best, cand| if cand.0 < best.0 { cand } else { best })
        .expect("at least one read");
    SampleResult {
        assignment,
        energy,
        feasible: true,
    }
}

fn anneal(m: &Bqm, adj: &[Vec<(usize, f64)>], schedule: &[f64], rng: &mut ChaCha8Rng) -> Vec<bool> {
    let n = m.num_variables();
    let mut x = vec![false; n];
    let mut field = m.objective.linear.clone();
    let mut energy = m.objective.offset;
    let mut best_energy = energy;
    let mut best = x.clone();

    for &t in schedule {
        for v in 0..n {
            let delta = if x[v] { -field[v] } else { field[v] };
            let accept = delta <= 0.0 || rng.random::<f64>() < (-delta / t).exp();
            if !accept {
                continue;
            }
            let sign = if x[v] { -1.0 } else { 1.0 };
            x[v] = !x[v];
            energy += delta;
            for &(u, c) in &adj[v] {
                field[u] += sign * c;
            }
        }
        if energy < best_energy {
            best_energy = energy;
            best.copy_from_slice(&x);
        }
    }
    best
}
