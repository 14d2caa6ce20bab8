//! Seed selection as max-min dispersion: bisect over candidate distance
//! thresholds, asking a maximum-independent-set model at each probe whether
//! `p` mutually distant areas exist.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Bqm, Sampler};
use crate::spatial::AreaGraph;
use crate::derive_seed;

/// Default penalty on selecting both endpoints of a threshold edge.
pub const DEFAULT_LAMBDA_MIS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedingConfig {
    pub p: usize,
    pub sampler: Sampler,
    pub lambda_mis: f64,
    pub rng_seed: u64,
    /// Restrict candidates to a seeded random sample of this many areas.
    /// `None` uses every area.
    pub candidate_limit: Option<usize>,
}

impl SeedingConfig {
    pub fn new(p: usize, sampler: Sampler, rng_seed: u64) -> Self {
        Self {
            p,
            sampler,
            lambda_mis: DEFAULT_LAMBDA_MIS,
            rng_seed,
            candidate_limit: None,
        }
    }
}

/// Outcome of one threshold probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub d_m: f64,
    pub mis_size: usize,
    pub feasible: bool,
    /// Every component of the threshold graph was enumerated exactly.
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    /// Exactly `p` area indices, ascending.
    pub seeds: Vec<usize>,
    /// Threshold of the largest feasible probe; seeds pairwise exceed it.
    pub achieved_dm: f64,
    /// Independent-set size before down-selection to `p`.
    pub mis_size: usize,
    /// Smallest infeasible threshold probed, if any.
    pub infeasible_dm: Option<f64>,
    /// Minimum pairwise centroid distance among the seeds (`None` for p = 1).
    pub min_seed_distance: Option<f64>,
    pub probes: Vec<Probe>,
}

/// Candidate pairs `(i, j)`, `i < j`, whose centroids lie within `d_m`.
pub fn build_threshold_graph(g: &AreaGraph, candidates: &[usize], d_m: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for (k, &i) in candidates.iter().enumerate() {
        for &j in &candidates[k + 1..] {
            if g.centroid_distance(i, j) <= d_m {
                edges.push((i.min(j), i.max(j)));
            }
        }
    }
    edges
}

pub fn seed_variable(area: usize) -> String {
    format!("x_{area}")
}

/// `−Σ x_i + λ Σ_{(i,j) ∈ E′} x_i x_j` over the candidates.
pub fn mis_bqm(edges: &[(usize, usize)], candidates: &[usize], lambda_mis: f64) -> Bqm {
    let mut b = Bqm::builder();
    for &c in candidates {
        b.add_linear(&seed_variable(c), -1.0);
    }
    for &(i, j) in edges {
        b.add_quadratic(&seed_variable(i), &seed_variable(j), lambda_mis);
    }
    b.build_bqm()
}

/// Independent set of the threshold graph found by the sampler, solved one
/// connected component at a time. Returns the set and whether every
/// component was solved exactly.
fn independent_set(
    candidates: &[usize],
    edges: &[(usize, usize)],
    cfg: &SeedingConfig,
    probe_seed: u64,
) -> (Vec<usize>, bool) {
    let pos: std::collections::HashMap<usize, usize> =
        candidates.iter().enumerate().map(|(k, &c)| (c, k)).collect();
    let mut adj = vec![Vec::new(); candidates.len()];
    for &(i, j) in edges {
        let (a, b) = (pos[&i], pos[&j]);
        adj[a].push(b);
        adj[b].push(a);
    }

    let mut comp = vec![usize::MAX; candidates.len()];
    let mut chosen = Vec::new();
    let mut exact = true;
    for start in 0..candidates.len() {
        if comp[start] != usize::MAX {
            continue;
        }
        let mut members = vec![start];
        comp[start] = start;
        let mut head = 0;
        while head < members.len() {
            let u = members[head];
            head += 1;
            for &v in &adj[u] {
                if comp[v] == usize::MAX {
                    comp[v] = start;
                    members.push(v);
                }
            }
        }
        if members.len() == 1 {
            chosen.push(candidates[start]);
            continue;
        }
        members.sort_unstable();
        let areas: Vec<usize> = members.iter().map(|&k| candidates[k]).collect();
        let comp_edges: Vec<(usize, usize)> = edges
            .iter()
            .copied()
            .filter(|&(i, _)| comp[pos[&i]] == start)
            .collect();
        let bqm = mis_bqm(&comp_edges, &areas, cfg.lambda_mis);
        exact &= cfg.sampler.is_exact_for(areas.len());
        let r = cfg.sampler.solve_bqm(&bqm, derive_seed(probe_seed, start as u64));
        let mut picked: Vec<usize> = r.selected().map(|v| areas[v]).collect();
        repair_independence(&mut picked, &comp_edges);
        chosen.extend(picked);
    }
    chosen.sort_unstable();
    (chosen, exact)
}

/// Drops the later endpoint of any edge with both ends selected. A sampler
/// at a local minimum never needs this when λ > 1.
fn repair_independence(picked: &mut Vec<usize>, edges: &[(usize, usize)]) {
    let mut on: std::collections::BTreeSet<usize> = picked.iter().copied().collect();
    for &(i, j) in edges {
        if on.contains(&i) && on.contains(&j) {
            on.remove(&j);
        }
    }
    if on.len() != picked.len() {
        log::debug!("dropped {} conflicting seeds from a sampled set", picked.len() - on.len());
    }
    *picked = on.into_iter().collect();
}

fn candidate_set(g: &AreaGraph, cfg: &SeedingConfig) -> Result<Vec<usize>> {
    let n = g.n();
    match cfg.candidate_limit {
        Some(k) if k < n => {
            if k < cfg.p {
                return Err(Error::InvalidInput(format!(
                    "candidate limit {k} is below p = {}",
                    cfg.p
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.rng_seed, 0xC0DE));
            let mut c = sample(&mut rng, n, k).into_vec();
            c.sort_unstable();
            Ok(c)
        }
        _ => Ok((0..n).collect()),
    }
}

/// Sorted distinct pairwise centroid distances among `candidates`, preceded
/// by 0 when all centroids are distinct.
fn probe_thresholds(g: &AreaGraph, candidates: &[usize]) -> Vec<f64> {
    let mut d = Vec::with_capacity(candidates.len() * candidates.len().saturating_sub(1) / 2 + 1);
    for (k, &i) in candidates.iter().enumerate() {
        for &j in &candidates[k + 1..] {
            d.push(g.centroid_distance(i, j));
        }
    }
    d.push(0.0);
    d.sort_unstable_by(f64::total_cmp);
    d.dedup();
    d
}

pub fn min_pairwise_distance(g: &AreaGraph, seeds: &[usize]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for (k, &i) in seeds.iter().enumerate() {
        for &j in &seeds[k + 1..] {
            let d = g.centroid_distance(i, j);
            best = Some(best.map_or(d, |b| b.min(d)));
        }
    }
    best
}

/// Picks `p` seeds maximizing (exactly, with the exhaustive sampler) the
/// minimum pairwise centroid distance.
pub fn select_seeds(g: &AreaGraph, cfg: &SeedingConfig) -> Result<SeedResult> {
    let p = cfg.p;
    if p == 0 || p > g.n() {
        return Err(Error::InvalidInput(format!("p = {p} must lie in 1..={}", g.n())));
    }
    if !(cfg.lambda_mis > 1.0) {
        return Err(Error::InvalidInput(format!(
            "lambda_mis = {} must exceed 1",
            cfg.lambda_mis
        )));
    }
    let candidates = candidate_set(g, cfg)?;
    let thresholds = probe_thresholds(g, &candidates);

    let mut probes = Vec::new();
    let mut best: Option<(usize, Vec<usize>)> = None;
    // lo: largest index known feasible, hi: smallest known infeasible
    let (mut lo, mut hi): (isize, usize) = (-1, thresholds.len());
    while hi as isize - lo > 1 {
        let mid = ((lo + hi as isize) / 2) as usize;
        let d_m = thresholds[mid];
        let edges = build_threshold_graph(g, &candidates, d_m);
        let (set, exact) = independent_set(&candidates, &edges, cfg, derive_seed(cfg.rng_seed, mid as u64));
        let feasible = set.len() >= p;
        probes.push(Probe {
            d_m,
            mis_size: set.len(),
            feasible,
            exact,
        });
        if feasible {
            lo = mid as isize;
            best = Some((mid, set));
        } else {
            hi = mid;
        }
    }
    check_monotone(&probes)?;

    let infeasible_dm = thresholds.get(hi).copied();
    let (achieved_dm, independent) = match best {
        Some((idx, set)) => (thresholds[idx], set),
        None => {
            // only duplicate centroids can make the 0 probe infeasible; with
            // no edges at all every candidate is independent
            log::warn!("no threshold probe was feasible; falling back to an edgeless graph");
            (0.0, candidates.clone())
        }
    };

    let mis_size = independent.len();
    let seeds = if mis_size > p {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.rng_seed, u64::MAX));
        let mut s: Vec<usize> = sample(&mut rng, mis_size, p)
            .into_iter()
            .map(|k| independent[k])
            .collect();
        s.sort_unstable();
        s
    } else {
        independent
    };
    Ok(SeedResult {
        min_seed_distance: min_pairwise_distance(g, &seeds),
        seeds,
        achieved_dm,
        mis_size,
        infeasible_dm,
        probes,
    })
}

/// With exact MIS answers feasibility is antitone in `d_m`; a feasible probe
/// above an infeasible one means a solver bug.
fn check_monotone(probes: &[Probe]) -> Result<()> {
    let exact: Vec<&Probe> = probes.iter().filter(|p| p.exact).collect();
    for a in &exact {
        for b in &exact {
            if a.feasible && !b.feasible && a.d_m > b.d_m {
                return Err(Error::Invariant(format!(
                    "threshold {} feasible but smaller threshold {} infeasible",
                    a.d_m, b.d_m
                )));
            }
        }
    }
    Ok(())
}

/// Classical farthest-point heuristic: start from a seeded random area and
/// repeatedly add the area farthest from the current set.
pub fn farthest_point_seeds(g: &AreaGraph, p: usize, rng_seed: u64) -> Result<Vec<usize>> {
    let n = g.n();
    if p == 0 || p > n {
        return Err(Error::InvalidInput(format!("p = {p} must lie in 1..={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let first = sample(&mut rng, n, 1).index(0);
    let mut seeds = vec![first];
    let mut nearest: Vec<f64> = (0..n).map(|i| g.centroid_distance(i, first)).collect();
    while seeds.len() < p {
        let next = (0..n)
            .filter(|i| !seeds.contains(i))
            .max_by(|&a, &b| nearest[a].total_cmp(&nearest[b]).then(b.cmp(&a)))
            .expect("p <= n leaves a candidate");
        seeds.push(next);
        for i in 0..n {
            nearest[i] = nearest[i].min(g.centroid_distance(i, next));
        }
    }
    seeds.sort_unstable();
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{solve_exhaustive, SaParams};
    use crate::spatial::Area;

    fn points(coords: &[[f64; 2]]) -> AreaGraph {
        let areas = coords
            .iter()
            .enumerate()
            .map(|(i, &c)| Area {
                id: i,
                label: i.to_string(),
                attribute: 0.0,
                centroid: c,
            })
            .collect();
        AreaGraph::new(areas, []).unwrap()
    }

    fn collinear(xs: &[f64]) -> AreaGraph {
        points(&xs.iter().map(|&x| [x, 0.0]).collect::<Vec<_>>())
    }

    #[test]
    fn threshold_graph_examples() {
        let g = collinear(&[0.0, 1.0, 3.0]);
        assert_eq!(build_threshold_graph(&g, &[0, 1, 2], 1.0), vec![(0, 1)]);
        assert!(build_threshold_graph(&g, &[0, 1, 2], 0.0).is_empty());
        assert_eq!(build_threshold_graph(&g, &[0, 1, 2], 3.0).len(), 3);
    }

    #[test]
    fn mis_model_examples() {
        let tri = mis_bqm(&[(0, 1), (1, 2), (0, 2)], &[0, 1, 2], 2.0);
        assert_eq!(tri.linear("x_0"), Some(-1.0));
        assert_eq!(tri.quadratic("x_0", "x_2"), Some(2.0));
        assert_eq!(tri.objective.offset, 0.0);
        let r = solve_exhaustive(&tri).unwrap();
        assert_eq!(r.energy, -1.0);
        assert_eq!(r.selected().count(), 1);

        let free = mis_bqm(&[], &[0, 1, 2], 2.0);
        let r = solve_exhaustive(&free).unwrap();
        assert_eq!((r.energy, r.selected().count()), (-3.0, 3));

        let path = mis_bqm(&[(0, 1), (1, 2)], &[0, 1, 2], 2.0);
        let r = solve_exhaustive(&path).unwrap();
        assert_eq!(r.energy, -2.0);
        assert_eq!(r.assignment, vec![true, false, true]);
    }

    #[test]
    fn collinear_pair() {
        let g = collinear(&[0.0, 1.0, 2.0, 3.0]);
        let r = select_seeds(&g, &SeedingConfig::new(2, Sampler::exhaustive(), 1)).unwrap();
        assert_eq!(r.seeds, vec![0, 3]);
        assert_eq!(r.min_seed_distance, Some(3.0));
        assert_eq!(r.achieved_dm, 2.0);
        assert_eq!(r.infeasible_dm, Some(3.0));
        assert_eq!(r.mis_size, 2);
    }

    #[test]
    fn all_areas_when_p_equals_n() {
        let g = collinear(&[0.0, 1.0, 2.5, 4.0]);
        let r = select_seeds(&g, &SeedingConfig::new(4, Sampler::exhaustive(), 1)).unwrap();
        assert_eq!(r.seeds, vec![0, 1, 2, 3]);
        assert_eq!(r.achieved_dm, 0.0);
        assert_eq!(r.infeasible_dm, Some(1.0));
    }

    #[test]
    fn square_diagonal() {
        let g = points(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        let r = select_seeds(&g, &SeedingConfig::new(2, Sampler::exhaustive(), 3)).unwrap();
        assert!(r.seeds == vec![0, 2] || r.seeds == vec![1, 3], "{:?}", r.seeds);
        assert!((r.min_seed_distance.unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.mis_size, 2);
    }

    #[test]
    fn down_selects_deterministically() {
        // five far-apart points, p = 2 at the first probe leaves 5 candidates
        let g = collinear(&[0.0, 10.0, 20.0, 30.0, 40.0, 41.0]);
        let cfg = SeedingConfig::new(2, Sampler::exhaustive(), 11);
        let a = select_seeds(&g, &cfg).unwrap();
        assert_eq!(a, select_seeds(&g, &cfg).unwrap());
        assert_eq!(a.seeds.len(), 2);
        assert!(a.mis_size >= 2);
    }

    #[test]
    fn duplicate_centroids_fall_back_to_zero() {
        let g = points(&[[0.0, 0.0], [0.0, 0.0]]);
        let r = select_seeds(&g, &SeedingConfig::new(2, Sampler::exhaustive(), 0)).unwrap();
        assert_eq!(r.seeds, vec![0, 1]);
        assert_eq!(r.achieved_dm, 0.0);
    }

    #[test]
    fn rejects_bad_p_and_lambda() {
        let g = collinear(&[0.0, 1.0]);
        assert!(select_seeds(&g, &SeedingConfig::new(3, Sampler::exhaustive(), 0)).is_err());
        assert!(select_seeds(&g, &SeedingConfig::new(0, Sampler::exhaustive(), 0)).is_err());
        let mut cfg = SeedingConfig::new(1, Sampler::exhaustive(), 0);
        cfg.lambda_mis = 1.0;
        assert!(select_seeds(&g, &cfg).is_err());
    }

    #[test]
    fn sa_sampler_and_candidate_limit() {
        let g = crate::spatial::generate_grid(6, 8, 2, Default::default()).unwrap();
        let mut cfg = SeedingConfig::new(5, Sampler::sa(SaParams { reads: 10, sweeps: 200, ..SaParams::default() }), 4);
        let full = select_seeds(&g, &cfg).unwrap();
        assert_eq!(full.seeds.len(), 5);
        assert!(full.min_seed_distance.unwrap() > full.achieved_dm);
        cfg.candidate_limit = Some(20);
        let limited = select_seeds(&g, &cfg).unwrap();
        assert_eq!(limited.seeds.len(), 5);
        assert_eq!(limited, select_seeds(&g, &cfg).unwrap());
    }

    #[test]
    fn farthest_point_examples() {
        let g = collinear(&[0.0, 1.0, 2.0, 3.0]);
        let s = farthest_point_seeds(&g, 2, 0).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.contains(&0) || s.contains(&3));
        assert_eq!(farthest_point_seeds(&g, 4, 0).unwrap(), vec![0, 1, 2, 3]);
    }
}
