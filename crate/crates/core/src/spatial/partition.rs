use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::graph::{AreaGraph, RegionStats};
use crate::error::{Error, Result};

/// Stats are rebuilt from scratch after this many incremental moves.
pub const REANCHOR_INTERVAL: usize = 100;

/// Relative tolerance for comparing cached and recomputed statistics.
pub const STATS_REL_TOL: f64 = 1e-9;

/// Zero-based region index. Displayed one-based in output files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RegionId(pub usize);

impl std::fmt::Display for RegionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "R{}", self.0 + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct RunningStats {
    count: usize,
    mean: f64,
    m2: f64,
    heterogeneity: f64,
}

impl RunningStats {
    fn from_exact(s: RegionStats) -> Self {
        Self {
            count: s.count,
            mean: s.mean,
            m2: s.variance * s.count as f64,
            heterogeneity: s.heterogeneity,
        }
    }

    fn snapshot(&self) -> RegionStats {
        let variance = if self.count <= 1 {
            0.0
        } else {
            (self.m2 / self.count as f64).max(0.0)
        };
        RegionStats {
            count: self.count,
            mean: self.mean,
            variance,
            heterogeneity: if self.count <= 1 { 0.0 } else { self.heterogeneity.max(0.0) },
        }
    }

    fn add(&mut self, x: f64, pairwise: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
        self.heterogeneity += pairwise;
    }

    fn remove(&mut self, x: f64, pairwise: f64) {
        if self.count == 1 {
            *self = Self {
                count: 0,
                mean: 0.0,
                m2: 0.0,
                heterogeneity: 0.0,
            };
            return;
        }
        let old_mean = self.mean;
        self.count -= 1;
        self.mean = (old_mean * (self.count + 1) as f64 - x) / self.count as f64;
        self.m2 -= (x - old_mean) * (x - self.mean);
        self.heterogeneity -= pairwise;
    }
}

/// Complete assignment of areas to `p` non-empty regions with cached
/// per-region statistics.
///
/// Mutation goes through [`Partition::move_area`], which keeps the stats
/// current incrementally and re-anchors them every [`REANCHOR_INTERVAL`]
/// moves. Contiguity is not enforced on mutation; callers check it.
#[derive(Debug, Clone)]
pub struct Partition {
    assignment: Vec<RegionId>,
    members: Vec<BTreeSet<usize>>,
    stats: Vec<RunningStats>,
    /// Areas attached without an adjacency path (isolated inputs). They are
    /// excluded from contiguity checks and never move.
    exceptions: BTreeSet<usize>,
    moves_since_anchor: usize,
}

impl PartialEq for Partition {
    fn eq(&self, other: &Self) -> bool {
        self.assignment == other.assignment && self.exceptions == other.exceptions
    }
}

impl Partition {
    /// `assignment[i]` is the zero-based region of area `i`.
    pub fn from_assignment(g: &AreaGraph, assignment: Vec<usize>, p: usize) -> Result<Self> {
        Self::with_exceptions(g, assignment, p, BTreeSet::new())
    }

    pub fn with_exceptions(
        g: &AreaGraph,
        assignment: Vec<usize>,
        p: usize,
        exceptions: BTreeSet<usize>,
    ) -> Result<Self> {
        if assignment.len() != g.n() {
            return Err(Error::InvalidInput(format!(
                "assignment covers {} areas, graph has {}",
                assignment.len(),
                g.n()
            )));
        }
        if p == 0 {
            return Err(Error::InvalidInput("p must be at least 1".into()));
        }
        let mut members = vec![BTreeSet::new(); p];
        for (area, &r) in assignment.iter().enumerate() {
            if r >= p {
                return Err(Error::InvalidInput(format!(
                    "area {area} assigned to region {r}, expected 0..{p}"
                )));
            }
            members[r].insert(area);
        }
        if let Some(r) = members.iter().position(BTreeSet::is_empty) {
            return Err(Error::InvalidInput(format!("region {} is empty", RegionId(r))));
        }
        if let Some(&bad) = exceptions.iter().find(|&&a| a >= g.n()) {
            return Err(Error::InvalidInput(format!("exception area {bad} out of range")));
        }
        let mut part = Self {
            assignment: assignment.into_iter().map(RegionId).collect(),
            members,
            stats: Vec::new(),
            exceptions,
            moves_since_anchor: 0,
        };
        part.recompute(g);
        Ok(part)
    }

    pub fn p(&self) -> usize {
        self.members.len()
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    #[inline]
    pub fn region_of(&self, area: usize) -> RegionId {
        self.assignment[area]
    }

    pub fn assignment(&self) -> &[RegionId] {
        &self.assignment
    }

    pub fn members(&self, r: RegionId) -> &BTreeSet<usize> {
        &self.members[r.0]
    }

    pub fn member_vec(&self, r: RegionId) -> Vec<usize> {
        self.members[r.0].iter().copied().collect()
    }

    pub fn regions(&self) -> impl Iterator<Item = RegionId> {
        (0..self.p()).map(RegionId)
    }

    pub fn exceptions(&self) -> &BTreeSet<usize> {
        &self.exceptions
    }

    pub fn is_exception(&self, area: usize) -> bool {
        self.exceptions.contains(&area)
    }

    /// Members that take part in contiguity checks.
    pub fn connected_members(&self, r: RegionId) -> Vec<usize> {
        self.members[r.0]
            .iter()
            .copied()
            .filter(|a| !self.exceptions.contains(a))
            .collect()
    }

    pub fn stats(&self, r: RegionId) -> RegionStats {
        self.stats[r.0].snapshot()
    }

    /// Cached total heterogeneity.
    pub fn heterogeneity(&self) -> f64 {
        self.stats.iter().map(|s| s.snapshot().heterogeneity).sum()
    }

    /// Σ_{j ∈ r, j ≠ area} |A(area) − A(j)|.
    pub fn pairwise_to_region(&self, g: &AreaGraph, area: usize, r: RegionId) -> f64 {
        let a = g.attribute(area);
        self.members[r.0]
            .iter()
            .filter(|&&j| j != area)
            .map(|&j| (a - g.attribute(j)).abs())
            .sum()
    }

    /// Exact change in total heterogeneity if `area` moved to `to`.
    pub fn exact_move_delta(&self, g: &AreaGraph, area: usize, to: RegionId) -> f64 {
        let from = self.region_of(area);
        if from == to {
            return 0.0;
        }
        self.pairwise_to_region(g, area, to) - self.pairwise_to_region(g, area, from)
    }

    /// Moves `area` into region `to`, updating stats incrementally. Refuses
    /// to empty a region. Returns the exact heterogeneity change.
    pub fn move_area(&mut self, g: &AreaGraph, area: usize, to: RegionId) -> Result<f64> {
        let from = self.region_of(area);
        if from == to {
            return Ok(0.0);
        }
        if to.0 >= self.p() {
            return Err(Error::InvalidInput(format!("region {to} does not exist")));
        }
        if self.members[from.0].len() == 1 {
            return Err(Error::InvalidInput(format!(
                "moving area {area} would empty region {from}"
            )));
        }
        let x = g.attribute(area);
        let loss = self.pairwise_to_region(g, area, from);
        let gain = self.pairwise_to_region(g, area, to);
        self.members[from.0].remove(&area);
        self.members[to.0].insert(area);
        self.assignment[area] = to;
        self.stats[from.0].remove(x, loss);
        self.stats[to.0].add(x, gain);
        self.moves_since_anchor += 1;
        if self.moves_since_anchor >= REANCHOR_INTERVAL {
            self.recompute(g);
        }
        Ok(gain - loss)
    }

    /// Rebuilds every region's stats from scratch.
    pub fn recompute(&mut self, g: &AreaGraph) {
        self.stats = self
            .members
            .iter()
            .map(|m| RunningStats::from_exact(RegionStats::from_values(m.iter().map(|&i| g.attribute(i)))))
            .collect();
        self.moves_since_anchor = 0;
    }

    /// Checks completeness, region count, contiguity and cached-stats
    /// consistency.
    pub fn validate(&self, g: &AreaGraph) -> Result<()> {
        if self.assignment.len() != g.n() {
            return Err(Error::Invariant("assignment does not cover the graph".into()));
        }
        let total: usize = self.members.iter().map(BTreeSet::len).sum();
        if total != g.n() {
            return Err(Error::Invariant(format!(
                "regions hold {total} areas, graph has {}",
                g.n()
            )));
        }
        for r in self.regions() {
            let m = &self.members[r.0];
            if m.is_empty() {
                return Err(Error::Invariant(format!("region {r} is empty")));
            }
            if let Some(&a) = m.iter().find(|&&a| self.assignment[a] != r) {
                return Err(Error::Invariant(format!(
                    "area {a} listed in {r} but assigned to {}",
                    self.assignment[a]
                )));
            }
            if !g.is_contiguous(&self.connected_members(r)) {
                return Err(Error::Invariant(format!("region {r} is not contiguous")));
            }
            let fresh = g.region_stats(&self.member_vec(r));
            if !self.stats(r).approx_eq(&fresh, STATS_REL_TOL) {
                return Err(Error::Invariant(format!(
                    "cached stats for {r} drifted: cached {:?}, fresh {:?}",
                    self.stats(r),
                    fresh
                )));
            }
        }
        Ok(())
    }
}

/// Σ over regions of exact heterogeneity, recomputed from scratch.
pub fn total_heterogeneity(g: &AreaGraph, part: &Partition) -> f64 {
    part.regions()
        .map(|r| g.region_heterogeneity(&part.member_vec(r)))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::graph::Area;

    fn line(attrs: &[f64]) -> AreaGraph {
        let areas = attrs
            .iter()
            .enumerate()
            .map(|(i, &a)| Area {
                id: i,
                label: i.to_string(),
                attribute: a,
                centroid: [i as f64, 0.0],
            })
            .collect();
        AreaGraph::new(areas, (1..attrs.len()).map(|i| (i - 1, i))).unwrap()
    }

    #[test]
    fn total_heterogeneity_examples() {
        let g = line(&[1.0, 2.0, 4.0, 9.0]);
        // {1,2,4} has H = 1 + 3 + 2 = 6 and {9} has H = 0
        let part = Partition::from_assignment(&g, vec![0, 0, 0, 1], 2).unwrap();
        assert_eq!(total_heterogeneity(&g, &part), 6.0);
        assert_eq!(part.heterogeneity(), 6.0);

        let singletons = Partition::from_assignment(&g, vec![0, 1, 2, 3], 4).unwrap();
        assert_eq!(total_heterogeneity(&g, &singletons), 0.0);

        let whole = Partition::from_assignment(&g, vec![0; 4], 1).unwrap();
        assert_eq!(total_heterogeneity(&g, &whole), g.region_heterogeneity(&[0, 1, 2, 3]));
    }

    #[test]
    fn rejects_empty_region_and_bad_ids() {
        let g = line(&[1.0, 2.0]);
        assert!(Partition::from_assignment(&g, vec![0, 0], 2).is_err());
        assert!(Partition::from_assignment(&g, vec![0, 2], 2).is_err());
        assert!(Partition::from_assignment(&g, vec![0], 1).is_err());
    }

    #[test]
    fn move_updates_stats_and_refuses_emptying() {
        let g = line(&[1.0, 2.0, 7.0, 9.0]);
        let mut part = Partition::from_assignment(&g, vec![0, 0, 0, 1], 2).unwrap();
        let before = part.heterogeneity();
        let predicted = part.exact_move_delta(&g, 2, RegionId(1));
        let delta = part.move_area(&g, 2, RegionId(1)).unwrap();
        assert_eq!(predicted, delta);
        // gain |7-9| = 2, loss |7-1| + |7-2| = 11
        assert_eq!(delta, -9.0);
        assert!((part.heterogeneity() - (before + delta)).abs() < 1e-12);
        part.validate(&g).unwrap();

        let g = line(&[1.0, 2.0, 4.0, 9.0]);
        let mut single = Partition::from_assignment(&g, vec![0, 1, 1, 1], 2).unwrap();
        assert!(single.move_area(&g, 0, RegionId(1)).is_err());
    }

    #[test]
    fn many_moves_stay_consistent() {
        let attrs: Vec<f64> = (0..30).map(|i| ((i * 37) % 11) as f64 * 0.3 + 0.1).collect();
        let g = line(&attrs);
        let mut assign = vec![0; 30];
        for a in assign.iter_mut().skip(15) {
            *a = 1;
        }
        let mut part = Partition::from_assignment(&g, assign, 2).unwrap();
        let mut h = part.heterogeneity();
        // shuttle the border back and forth; contiguity holds throughout
        for step in 0..250 {
            let (area, to) = if step % 2 == 0 { (14, 1) } else { (14, 0) };
            h += part.move_area(&g, area, RegionId(to)).unwrap();
            assert!(crate::approx_eq(h, total_heterogeneity(&g, &part), 1e-9));
        }
        part.validate(&g).unwrap();
    }

    #[test]
    fn validate_flags_discontiguous_region() {
        let g = line(&[1.0, 2.0, 3.0]);
        let part = Partition::from_assignment(&g, vec![0, 1, 0], 2).unwrap();
        assert!(matches!(part.validate(&g), Err(Error::Invariant(_))));
        let excepted =
            Partition::with_exceptions(&g, vec![0, 1, 0], 2, BTreeSet::from([2])).unwrap();
        excepted.validate(&g).unwrap();
    }
}
