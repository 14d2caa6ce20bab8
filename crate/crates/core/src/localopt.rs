//! Iterative border-move refinement.
//!
//! Each iteration enumerates movable border areas, scores every move with
//! the statistical heterogeneity estimators, and solves a constrained binary
//! model that picks a mutually compatible subset: an area moves at most
//! once, and a region takes part in at most one move (as donor or receiver).

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::derive_seed;
use crate::error::{Error, Result};
use crate::model::{solve_cqm, ConstraintSpec, Cqm, Sampler, Sense};
use crate::spatial::{AreaGraph, Partition, RegionId, RegionStats, STATS_REL_TOL};

/// Relocation of `area` from `donor` to `receiver` with its estimated
/// heterogeneity change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoveCandidate {
    pub area: usize,
    pub donor: RegionId,
    pub receiver: RegionId,
    pub delta_add: f64,
    pub delta_remove: f64,
    pub delta_total: f64,
}

impl MoveCandidate {
    pub fn new(area: usize, donor: RegionId, receiver: RegionId, donor_stats: &RegionStats, receiver_stats: &RegionStats, value: f64) -> Self {
        let delta_add = estimate_delta_add(receiver_stats, value);
        let delta_remove = estimate_delta_remove(donor_stats, value);
        Self {
            area,
            donor,
            receiver,
            delta_add,
            delta_remove,
            delta_total: delta_add + delta_remove,
        }
    }

    /// Model variable name, `m_<area>_<donor>_<receiver>` with one-based
    /// region numbers.
    pub fn variable(&self) -> String {
        format!("m_{}_{}_{}", self.area, self.donor.0 + 1, self.receiver.0 + 1)
    }
}

/// Estimated heterogeneity gained by a receiver region (stats exclude the
/// incoming value): `N · sqrt(V + (M − A)²)`.
pub fn estimate_delta_add(receiver: &RegionStats, value: f64) -> f64 {
    receiver.count as f64 * (receiver.variance + (receiver.mean - value).powi(2)).sqrt()
}

/// Estimated heterogeneity shed by a donor region (stats include the
/// outgoing value): `−(N − 1) · sqrt(V + (M − A)²)`.
pub fn estimate_delta_remove(donor: &RegionStats, value: f64) -> f64 {
    if donor.count <= 1 {
        return 0.0;
    }
    -((donor.count - 1) as f64) * (donor.variance + (donor.mean - value).powi(2)).sqrt()
}

/// Every move that keeps both regions contiguous and non-empty: for each
/// region with at least two members, each non-articulation member yields one
/// candidate per distinct foreign region it touches.
pub fn movable_areas(g: &AreaGraph, part: &Partition) -> Result<Vec<MoveCandidate>> {
    let mut out = Vec::new();
    for donor in part.regions() {
        if part.members(donor).len() < 2 {
            continue;
        }
        let connected = part.connected_members(donor);
        let cuts: BTreeSet<usize> = g.articulation_areas(&connected)?.into_iter().collect();
        let donor_stats = part.stats(donor);
        for &area in &connected {
            if cuts.contains(&area) {
                continue;
            }
            let receivers: BTreeSet<RegionId> = g
                .neighbors(area)
                .iter()
                .map(|&v| part.region_of(v))
                .filter(|&r| r != donor)
                .collect();
            let value = g.attribute(area);
            for receiver in receivers {
                out.push(MoveCandidate::new(
                    area,
                    donor,
                    receiver,
                    &donor_stats,
                    &part.stats(receiver),
                    value,
                ));
            }
        }
    }
    Ok(out)
}

/// One binary variable per candidate with its estimated delta as the
/// objective coefficient, plus the two compatibility constraint families.
pub fn build_move_cqm(candidates: &[MoveCandidate], p: usize) -> Result<Cqm> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no move candidates".into()));
    }
    let mut b = Cqm::builder();
    let mut by_area: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    let mut by_region: BTreeMap<RegionId, Vec<String>> = BTreeMap::new();
    for c in candidates {
        if c.donor == c.receiver || c.donor.0 >= p || c.receiver.0 >= p {
            return Err(Error::InvalidInput(format!("malformed candidate {c:?}")));
        }
        let name = c.variable();
        b.add_linear(&name, c.delta_total);
        by_area.entry(c.area).or_default().push(name.clone());
        by_region.entry(c.donor).or_default().push(name.clone());
        by_region.entry(c.receiver).or_default().push(name);
    }
    let at_most_one = |names: Vec<String>, label: String| ConstraintSpec {
        terms: names.into_iter().map(|n| (n, 1.0)).collect(),
        sense: Sense::Le,
        bound: 1.0,
        label,
    };
    let mut constraints: Vec<ConstraintSpec> = by_area
        .into_iter()
        .map(|(a, names)| at_most_one(names, format!("one_move_area_{a}")))
        .collect();
    constraints.extend(
        by_region
            .into_iter()
            .map(|(r, names)| at_most_one(names, format!("region_stability_{}", r.0 + 1))),
    );
    b.build_cqm(constraints)
}

/// Checks both compatibility families on a selected move set.
pub fn check_move_constraints(moves: &[MoveCandidate]) -> Result<()> {
    let mut areas = BTreeSet::new();
    let mut regions: BTreeMap<RegionId, usize> = BTreeMap::new();
    for m in moves {
        if !areas.insert(m.area) {
            return Err(Error::ConstraintViolation(format!("one-move-per-area for area {}", m.area)));
        }
        for r in [m.donor, m.receiver] {
            let uses = regions.entry(r).or_default();
            *uses += 1;
            if *uses > 1 {
                return Err(Error::ConstraintViolation(format!("region stability for {r}")));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MoveStatus {
    Applied,
    /// Exact delta was not negative while gating.
    Gated,
    /// The move no longer matched the partition (area not in donor, lost
    /// adjacency, or became an articulation area).
    Stale,
    /// Applied, then undone because a region lost contiguity.
    RolledBack,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoveOutcome {
    pub candidate: MoveCandidate,
    pub exact_delta: f64,
    pub status: MoveStatus,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ApplyOutcome {
    pub moves: Vec<MoveOutcome>,
    /// Sum of exact deltas of applied moves.
    pub exact_delta: f64,
}

impl ApplyOutcome {
    pub fn applied(&self) -> usize {
        self.moves.iter().filter(|m| m.status == MoveStatus::Applied).count()
    }
}

fn still_valid(g: &AreaGraph, part: &Partition, c: &MoveCandidate) -> bool {
    if part.region_of(c.area) != c.donor || part.members(c.donor).len() < 2 || part.is_exception(c.area) {
        return false;
    }
    if !g.neighbors(c.area).iter().any(|&v| part.region_of(v) == c.receiver) {
        return false;
    }
    let rest: Vec<usize> = part
        .connected_members(c.donor)
        .into_iter()
        .filter(|&a| a != c.area)
        .collect();
    g.is_contiguous(&rest)
}

/// Applies a compatible move set in ascending estimated-delta order. With
/// `gate_exact`, a move is kept only if its exact delta is negative.
pub fn apply_moves(
    g: &AreaGraph,
    part: &mut Partition,
    selected: &[MoveCandidate],
    gate_exact: bool,
) -> Result<ApplyOutcome> {
    check_move_constraints(selected)?;
    let mut order: Vec<MoveCandidate> = selected.to_vec();
    order.sort_by(|a, b| {
        a.delta_total
            .total_cmp(&b.delta_total)
            .then(a.area.cmp(&b.area))
            .then(a.receiver.cmp(&b.receiver))
    });
    let mut outcome = ApplyOutcome::default();
    for c in order {
        if !still_valid(g, part, &c) {
            outcome.moves.push(MoveOutcome { candidate: c, exact_delta: 0.0, status: MoveStatus::Stale });
            continue;
        }
        let exact = part.exact_move_delta(g, c.area, c.receiver);
        if gate_exact && exact >= 0.0 {
            outcome.moves.push(MoveOutcome { candidate: c, exact_delta: exact, status: MoveStatus::Gated });
            continue;
        }
        let realized = part.move_area(g, c.area, c.receiver)?;
        let ok = g.is_contiguous(&part.connected_members(c.donor))
            && g.is_contiguous(&part.connected_members(c.receiver));
        if ok {
            outcome.exact_delta += realized;
            outcome.moves.push(MoveOutcome { candidate: c, exact_delta: realized, status: MoveStatus::Applied });
        } else {
            log::warn!("move of area {} from {} to {} broke contiguity; rolled back", c.area, c.donor, c.receiver);
            part.move_area(g, c.area, c.donor)?;
            outcome.moves.push(MoveOutcome { candidate: c, exact_delta: realized, status: MoveStatus::RolledBack });
        }
    }
    Ok(outcome)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeConfig {
    pub iterations: usize,
    pub sampler: Sampler,
    pub gate_exact: bool,
    /// Penalty weight for annealed move models; `None` derives it.
    pub penalty: Option<f64>,
    pub rng_seed: u64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            iterations: 10,
            sampler: Sampler::exhaustive(),
            gate_exact: true,
            penalty: None,
            rng_seed: 0,
        }
    }
}

/// Separator-theorem range for the number of movable border areas.
pub fn separator_band(n: usize, p: usize) -> (f64, f64) {
    let (n, p) = (n as f64, p as f64);
    (2.0 * (n * p).sqrt(), 2.0 * p * n.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub candidates: usize,
    pub selected: Vec<MoveCandidate>,
    pub estimated_delta: f64,
    pub exact_delta: f64,
    pub applied: usize,
    pub h_before: f64,
    pub h_after: f64,
    pub band_low: f64,
    pub band_high: f64,
    /// `"exhaustive"`, `"penalty-sa"`, or `"none"` when nothing was solved.
    pub strategy: String,
    pub feasible: bool,
    pub runtime_ms: f64,
    /// Reported after early termination; nothing ran.
    pub noop: bool,
}

/// Runs up to `cfg.iterations` rounds of candidate enumeration, model
/// solving and move application. Stops early when there are no candidates,
/// the solver selects nothing, or an exact solve applied nothing; the
/// remaining rounds are reported as no-ops.
pub fn optimize(g: &AreaGraph, mut part: Partition, cfg: &OptimizeConfig) -> Result<(Partition, Vec<IterationReport>)> {
    if cfg.iterations == 0 {
        return Err(Error::InvalidInput("iterations must be at least 1".into()));
    }
    let (band_low, band_high) = separator_band(g.n(), part.p());
    let mut reports = Vec::with_capacity(cfg.iterations);
    let mut done = false;
    for iteration in 0..cfg.iterations {
        let h_before = part.heterogeneity();
        if done {
            reports.push(IterationReport {
                iteration,
                candidates: 0,
                selected: Vec::new(),
                estimated_delta: 0.0,
                exact_delta: 0.0,
                applied: 0,
                h_before,
                h_after: h_before,
                band_low,
                band_high,
                strategy: "none".into(),
                feasible: true,
                runtime_ms: 0.0,
                noop: true,
            });
            continue;
        }
        let started = Instant::now();
        let (report, applied) = iterate(g, &mut part, cfg, iteration)?;
        let mut report = report;
        report.band_low = band_low;
        report.band_high = band_high;
        report.runtime_ms = started.elapsed().as_secs_f64() * 1e3;
        log::debug!(
            "iteration {iteration}: {} candidates (band {band_low:.1}..{band_high:.1}), {} selected, {applied} applied, H {:.6} -> {:.6}",
            report.candidates,
            report.selected.len(),
            report.h_before,
            report.h_after
        );
        // an unchanged partition gives the exhaustive solver the same model again
        done = report.candidates == 0
            || report.selected.is_empty()
            || (applied == 0 && report.strategy == "exhaustive");
        reports.push(report);
    }
    Ok((part, reports))
}

fn iterate(g: &AreaGraph, part: &mut Partition, cfg: &OptimizeConfig, iteration: usize) -> Result<(IterationReport, usize)> {
    let h_before = part.heterogeneity();
    let candidates = movable_areas(g, part)?;
    let mut report = IterationReport {
        iteration,
        candidates: candidates.len(),
        selected: Vec::new(),
        estimated_delta: 0.0,
        exact_delta: 0.0,
        applied: 0,
        h_before,
        h_after: h_before,
        band_low: 0.0,
        band_high: 0.0,
        strategy: "none".into(),
        feasible: true,
        runtime_ms: 0.0,
        noop: false,
    };
    if candidates.is_empty() {
        return Ok((report, 0));
    }

    let cqm = build_move_cqm(&candidates, part.p())?;
    let strategy = cfg
        .sampler
        .cqm_strategy(cqm.num_variables(), cfg.penalty, derive_seed(cfg.rng_seed, iteration as u64));
    let (result, info) = solve_cqm(&cqm, &strategy)?;
    report.strategy = if info.exhaustive { "exhaustive" } else { "penalty-sa" }.into();
    report.feasible = result.feasible;
    if !result.feasible {
        log::warn!("iteration {iteration}: move model solve was infeasible; selecting no moves");
    } else {
        report.selected = result.selected().map(|k| candidates[k]).collect();
    }
    check_move_constraints(&report.selected).map_err(|e| Error::Invariant(format!("solver output: {e}")))?;
    report.estimated_delta = report.selected.iter().map(|c| c.delta_total).sum();

    let outcome = apply_moves(g, part, &report.selected, cfg.gate_exact)?;
    report.exact_delta = outcome.exact_delta;
    report.applied = outcome.applied();
    report.h_after = part.heterogeneity();

    part.validate(g)?;
    if !crate::approx_eq(report.h_after, h_before + outcome.exact_delta, STATS_REL_TOL) {
        return Err(Error::Invariant(format!(
            "H bookkeeping drifted: {} + {} != {}",
            h_before, outcome.exact_delta, report.h_after
        )));
    }
    if cfg.gate_exact && report.h_after > h_before + STATS_REL_TOL * h_before.abs().max(1.0) {
        return Err(Error::Invariant(format!(
            "gated iteration increased H from {h_before} to {}",
            report.h_after
        )));
    }
    Ok((report, outcome.applied()))
}
