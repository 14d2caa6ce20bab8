//! Initial feasible solution: grow regions from seeds, then absorb enclaves.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::{select_seeds, SeedResult, SeedingConfig};
use crate::spatial::{AreaGraph, Partition};

/// Region assignment under construction; `None` marks an unassigned area.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialAssignment {
    pub region: Vec<Option<usize>>,
    pub p: usize,
    /// `(area, region)` in assignment order, seeds first.
    pub growth_order: Vec<(usize, usize)>,
}

impl PartialAssignment {
    pub fn unassigned(&self) -> impl Iterator<Item = usize> + '_ {
        self.region
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_none())
            .map(|(i, _)| i)
    }

    fn members(&self, r: usize) -> impl Iterator<Item = usize> + '_ {
        self.region
            .iter()
            .enumerate()
            .filter(move |(_, x)| **x == Some(r))
            .map(|(i, _)| i)
    }
}

/// How one enclave area was absorbed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EnclaveResolution {
    /// Joined an adjacent region at the given exact heterogeneity increase.
    Adjacent { area: usize, region: usize, increase: f64 },
    /// No adjacency path to any region; attached to the region whose
    /// centroid mean is nearest. Contiguity exception.
    Nearest { area: usize, region: usize, distance: f64 },
}

#[derive(Debug, Clone)]
pub struct InitialSolution {
    pub partition: Partition,
    pub seeds: SeedResult,
    pub unassigned_history: usize,
    pub growth_order: Vec<(usize, usize)>,
    pub enclaves: Vec<EnclaveResolution>,
}

fn increase(g: &AreaGraph, area: usize, members: &[usize]) -> f64 {
    let a = g.attribute(area);
    members.iter().map(|&j| (a - g.attribute(j)).abs()).sum()
}

/// Grows one region per seed (region `k` starts at `seeds[k]`). Each step
/// the smallest region that still has an unassigned neighbor claims the
/// neighbor that raises its heterogeneity least. Ties go to the lower
/// region id, then the lower area index.
pub fn grow_regions(g: &AreaGraph, seeds: &[usize]) -> Result<PartialAssignment> {
    let n = g.n();
    let p = seeds.len();
    let mut region = vec![None; n];
    let mut members: Vec<Vec<usize>> = Vec::with_capacity(p);
    let mut frontier: Vec<BTreeSet<usize>> = Vec::with_capacity(p);
    let mut growth_order = Vec::with_capacity(n);
    for (k, &s) in seeds.iter().enumerate() {
        if s >= n {
            return Err(Error::InvalidInput(format!("seed {s} out of range")));
        }
        if region[s].is_some() {
            return Err(Error::InvalidInput(format!("seed {s} listed twice")));
        }
        region[s] = Some(k);
        members.push(vec![s]);
        growth_order.push((s, k));
    }
    for &s in seeds {
        frontier.push(g.neighbors(s).iter().copied().filter(|&v| region[v].is_none()).collect());
    }

    let mut by_size: Vec<usize> = (0..p).collect();
    loop {
        by_size.sort_by_key(|&r| (members[r].len(), r));
        let mut grown = false;
        for &r in &by_size {
            frontier[r].retain(|&v| region[v].is_none());
            let Some(area) = frontier[r]
                .iter()
                .copied()
                .map(|v| (increase(g, v, &members[r]), v))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .map(|(_, v)| v)
            else {
                continue;
            };
            region[area] = Some(r);
            members[r].push(area);
            growth_order.push((area, r));
            frontier[r].remove(&area);
            frontier[r].extend(g.neighbors(area).iter().copied().filter(|&v| region[v].is_none()));
            grown = true;
            break;
        }
        if !grown {
            break;
        }
    }
    Ok(PartialAssignment {
        region,
        p,
        growth_order,
    })
}

fn centroid_mean(g: &AreaGraph, members: &[usize]) -> [f64; 2] {
    let k = members.len() as f64;
    let (sx, sy) = members.iter().fold((0.0, 0.0), |(x, y), &i| {
        let c = g.area(i).centroid;
        (x + c[0], y + c[1])
    });
    [sx / k, sy / k]
}

/// Completes a partial assignment. Unassigned areas are visited in ascending
/// index; any with an assigned neighbor joins the adjacent region with the
/// smallest exact heterogeneity increase (lowest region id on ties), and the
/// sweep repeats until nothing changes. Whatever remains has no adjacency
/// path to a region: each such component is attached to the region whose
/// centroid mean is nearest its lowest-index area and recorded as a
/// contiguity exception.
pub fn assign_enclaves(
    g: &AreaGraph,
    mut partial: PartialAssignment,
) -> Result<(Partition, Vec<EnclaveResolution>)> {
    let p = partial.p;
    if p == 0 {
        return Err(Error::InvalidInput("no regions to assign enclaves to".into()));
    }
    let mut log = Vec::new();
    let mut members: Vec<Vec<usize>> = (0..p).map(|r| partial.members(r).collect()).collect();
    if let Some(r) = members.iter().position(Vec::is_empty) {
        return Err(Error::InvalidInput(format!("region {r} has no seed")));
    }

    loop {
        let mut changed = false;
        let pending: Vec<usize> = partial.unassigned().collect();
        for area in pending {
            let mut adjacent: Vec<usize> = g
                .neighbors(area)
                .iter()
                .filter_map(|&v| partial.region[v])
                .collect();
            adjacent.sort_unstable();
            adjacent.dedup();
            let Some((inc, r)) = adjacent
                .into_iter()
                .map(|r| (increase(g, area, &members[r]), r))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            else {
                continue;
            };
            partial.region[area] = Some(r);
            members[r].push(area);
            log.push(EnclaveResolution::Adjacent { area, region: r, increase: inc });
            changed = true;
        }
        if !changed {
            break;
        }
    }

    let mut exceptions = BTreeSet::new();
    loop {
        let Some(start) = partial.unassigned().next() else {
            break;
        };
        let target = centroid_of(g, start);
        let (distance, r) = (0..p)
            .map(|r| {
                let c = centroid_mean(g, &members[r]);
                ((c[0] - target[0]).hypot(c[1] - target[1]), r)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .expect("p >= 1");
        let mut stack = vec![start];
        partial.region[start] = Some(r);
        while let Some(u) = stack.pop() {
            members[r].push(u);
            exceptions.insert(u);
            let d = if u == start {
                distance
            } else {
                let c = centroid_mean(g, &members[r]);
                let a = centroid_of(g, u);
                (c[0] - a[0]).hypot(c[1] - a[1])
            };
            log::warn!(
                "area {} ({}) has no adjacency path to any region; attached to region {} by centroid distance",
                u,
                g.area(u).label,
                r + 1
            );
            log.push(EnclaveResolution::Nearest { area: u, region: r, distance: d });
            for &v in g.neighbors(u) {
                if partial.region[v].is_none() {
                    partial.region[v] = Some(r);
                    stack.push(v);
                }
            }
        }
    }

    let assignment: Vec<usize> = partial
        .region
        .iter()
        .map(|r| r.expect("every area assigned"))
        .collect();
    let part = Partition::with_exceptions(g, assignment, p, exceptions)?;
    Ok((part, log))
}

fn centroid_of(g: &AreaGraph, i: usize) -> [f64; 2] {
    g.area(i).centroid
}

/// Seed selection, region growing and enclave assignment.
pub fn initial_solution(g: &AreaGraph, cfg: &SeedingConfig) -> Result<InitialSolution> {
    let seeds = select_seeds(g, cfg)?;
    initial_solution_from_seeds(g, seeds)
}

/// Region growing and enclave assignment from an existing seed set.
pub fn initial_solution_from_seeds(g: &AreaGraph, seeds: SeedResult) -> Result<InitialSolution> {
    let partial = grow_regions(g, &seeds.seeds)?;
    let growth_order = partial.growth_order.clone();
    let unassigned_history = partial.unassigned().count();
    let (partition, enclaves) = assign_enclaves(g, partial)?;
    Ok(InitialSolution {
        partition,
        seeds,
        unassigned_history,
        growth_order,
        enclaves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Sampler;
    use crate::spatial::{generate_grid, Area, AttrDist};

    fn graph(attrs: &[f64], edges: &[(usize, usize)]) -> AreaGraph {
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
        AreaGraph::new(areas, edges.iter().copied()).unwrap()
    }

    #[test]
    fn all_seeds_stay_singletons() {
        let g = graph(&[1.0, 2.0, 3.0], &[(0, 1), (1, 2)]);
        let partial = grow_regions(&g, &[0, 1, 2]).unwrap();
        assert_eq!(partial.region, vec![Some(0), Some(1), Some(2)]);
    }

    #[test]
    fn middle_joins_cheaper_region() {
        let g = graph(&[1.0, 2.0, 4.0], &[(0, 1), (1, 2)]);
        let partial = grow_regions(&g, &[0, 2]).unwrap();
        assert_eq!(partial.region[1], Some(0));
        assert_eq!(partial.growth_order.last(), Some(&(1, 0)));
    }

    #[test]
    fn unreachable_area_is_left_unassigned() {
        let g = graph(&[1.0, 2.0, 4.0], &[(0, 1)]);
        let partial = grow_regions(&g, &[0]).unwrap();
        assert_eq!(partial.region, vec![Some(0), Some(0), None]);
    }

    #[test]
    fn enclave_joins_cheaper_neighbor() {
        // area 1 touches region 0 (attr 4, increase 3) and region 1 (attr 6, increase 5)
        let g = graph(&[4.0, 1.0, 6.0], &[(0, 1), (1, 2)]);
        let partial = PartialAssignment {
            region: vec![Some(0), None, Some(1)],
            p: 2,
            growth_order: vec![(0, 0), (2, 1)],
        };
        let (part, log) = assign_enclaves(&g, partial).unwrap();
        assert_eq!(part.region_of(1).0, 0);
        assert_eq!(log, vec![EnclaveResolution::Adjacent { area: 1, region: 0, increase: 3.0 }]);
    }

    #[test]
    fn no_enclaves_is_a_no_op() {
        let g = graph(&[1.0, 2.0], &[(0, 1)]);
        let partial = PartialAssignment {
            region: vec![Some(0), Some(1)],
            p: 2,
            growth_order: vec![],
        };
        let (part, log) = assign_enclaves(&g, partial).unwrap();
        assert!(log.is_empty());
        assert_eq!(part.region_of(0).0, 0);
        assert_eq!(part.region_of(1).0, 1);
    }

    #[test]
    fn isolated_area_goes_to_nearest_region() {
        // areas at x = 0, 1, 2, 3; area 3 isolated; region 1 = {2} is nearest
        let g = graph(&[1.0, 1.0, 1.0, 1.0], &[(0, 1)]);
        let partial = PartialAssignment {
            region: vec![Some(0), Some(0), Some(1), None],
            p: 2,
            growth_order: vec![],
        };
        let (part, log) = assign_enclaves(&g, partial).unwrap();
        assert_eq!(part.region_of(3).0, 1);
        assert!(part.is_exception(3));
        assert_eq!(log, vec![EnclaveResolution::Nearest { area: 3, region: 1, distance: 1.0 }]);
        part.validate(&g).unwrap();
    }

    #[test]
    fn seedless_component_is_attached_whole() {
        let g = graph(&[1.0, 2.0, 3.0, 4.0], &[(0, 1), (2, 3)]);
        let partial = grow_regions(&g, &[0]).unwrap();
        let (part, _) = assign_enclaves(&g, partial).unwrap();
        assert_eq!(part.exceptions().iter().copied().collect::<Vec<_>>(), vec![2, 3]);
        part.validate(&g).unwrap();
    }

    #[test]
    fn grid_initial_solution_is_valid() {
        let g = generate_grid(5, 10, 17, AttrDist::default()).unwrap();
        let mut cfg = SeedingConfig::new(10, Sampler::exhaustive(), 3);
        cfg.sampler.sa.reads = 10;
        let init = initial_solution(&g, &cfg).unwrap();
        assert_eq!(init.partition.p(), 10);
        init.partition.validate(&g).unwrap();
        assert_eq!(init.growth_order.len(), 50);
        // every growth step attaches to an already-assigned neighbor
        let mut placed = vec![None; g.n()];
        for (k, &(area, r)) in init.growth_order.iter().enumerate() {
            if k >= 10 {
                assert!(g.neighbors(area).iter().any(|&v| placed[v] == Some(r)));
            }
            placed[area] = Some(r);
        }
    }

    #[test]
    fn extreme_p() {
        let g = generate_grid(3, 3, 5, AttrDist::default()).unwrap();
        let one = initial_solution(&g, &SeedingConfig::new(1, Sampler::exhaustive(), 0)).unwrap();
        let all: Vec<usize> = (0..9).collect();
        assert_eq!(one.partition.heterogeneity(), g.region_heterogeneity(&all));

        let every = initial_solution(&g, &SeedingConfig::new(9, Sampler::exhaustive(), 0)).unwrap();
        assert_eq!(every.partition.heterogeneity(), 0.0);
    }
}
