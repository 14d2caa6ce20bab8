//! Classical comparison optimizer: single best exact move per iteration.
//!
//! This emulates a one-move-at-a-time classical local search over the same
//! candidate enumeration the model-based optimizer uses.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::localopt::{movable_areas, MoveCandidate};
use crate::spatial::{AreaGraph, Partition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineIteration {
    pub iteration: usize,
    pub candidates: usize,
    pub applied: Option<MoveCandidate>,
    pub exact_delta: f64,
    pub h_before: f64,
    pub h_after: f64,
    pub runtime_ms: f64,
}

/// Candidate with the most negative exact delta, if any improves.
pub fn best_greedy_move(g: &AreaGraph, part: &Partition) -> Result<Option<(MoveCandidate, f64)>> {
    let best = movable_areas(g, part)?
        .into_iter()
        .map(|c| (c, part.exact_move_delta(g, c.area, c.receiver)))
        .filter(|(_, d)| *d < 0.0)
        .min_by(|a, b| {
            a.1.total_cmp(&b.1)
                .then(a.0.area.cmp(&b.0.area))
                .then(a.0.receiver.cmp(&b.0.receiver))
        });
    Ok(best)
}

/// Applies the single best strictly improving move each iteration; stops
/// early when none exists.
pub fn classical_baseline(
    g: &AreaGraph,
    mut part: Partition,
    iterations: usize,
) -> Result<(Partition, Vec<BaselineIteration>)> {
    let mut log = Vec::with_capacity(iterations);
    for iteration in 0..iterations {
        let started = Instant::now();
        let h_before = part.heterogeneity();
        let candidates = movable_areas(g, &part)?.len();
        let best = best_greedy_move(g, &part)?;
        let (applied, exact_delta) = match best {
            Some((c, _)) => (Some(c), part.move_area(g, c.area, c.receiver)?),
            None => (None, 0.0),
        };
        log.push(BaselineIteration {
            iteration,
            candidates,
            applied,
            exact_delta,
            h_before,
            h_after: part.heterogeneity(),
            runtime_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        if applied.is_none() {
            break;
        }
    }
    Ok((part, log))
}
