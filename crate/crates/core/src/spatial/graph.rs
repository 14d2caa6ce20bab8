use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A spatial unit: one dissimilarity attribute and a representative point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub id: usize,
    /// Label from the source dataset, echoed back in solution output.
    pub label: String,
    pub attribute: f64,
    pub centroid: [f64; 2],
}

/// Problem instance: areas plus a symmetric, loop-free adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaGraph {
    areas: Vec<Area>,
    adjacency: Vec<Vec<usize>>,
}

impl AreaGraph {
    /// Builds a graph from areas and an undirected edge list. Edges are
    /// symmetrized and deduplicated; self-loops are dropped.
    pub fn new(areas: Vec<Area>, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let n = areas.len();
        for (i, a) in areas.iter().enumerate() {
            if a.id != i {
                return Err(Error::InvalidInput(format!(
                    "area at position {i} has id {}; ids must be dense 0..n",
                    a.id
                )));
            }
            if !a.attribute.is_finite() {
                return Err(Error::MissingAttribute {
                    area: a.label.clone(),
                    attribute: "<non-finite>".into(),
                });
            }
            if !a.centroid.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "area `{}` has a non-finite centroid",
                    a.label
                )));
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({u}, {v}) references an area outside 0..{n}"
                )));
            }
            if u == v {
                continue;
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
            nbrs.dedup();
        }
        Ok(Self { areas, adjacency })
    }

    pub fn n(&self) -> usize {
        self.areas.len()
    }

    pub fn areas(&self) -> &[Area] {
        &self.areas
    }

    pub fn area(&self, i: usize) -> &Area {
        &self.areas[i]
    }

    #[inline]
    pub fn attribute(&self, i: usize) -> f64 {
        self.areas[i].attribute
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, nbrs)| nbrs.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    /// Euclidean distance between the centroids of `i` and `j`.
    pub fn centroid_distance(&self, i: usize, j: usize) -> f64 {
        let [x1, y1] = self.areas[i].centroid;
        let [x2, y2] = self.areas[j].centroid;
        (x1 - x2).hypot(y1 - y2)
    }

    /// Sum of absolute attribute differences over unordered member pairs.
    pub fn region_heterogeneity(&self, members: &[usize]) -> f64 {
        let mut values: Vec<f64> = members.iter().map(|&i| self.attribute(i)).collect();
        sorted_pairwise_abs_sum(&mut values)
    }

    pub fn region_stats(&self, members: &[usize]) -> RegionStats {
        RegionStats::from_values(members.iter().map(|&i| self.attribute(i)))
    }

    /// True iff the subgraph induced by `members` is connected.
    pub fn is_contiguous(&self, members: &[usize]) -> bool {
        let Some(&start) = members.first() else {
            return true;
        };
        let mut inside = MemberMask::new(self.n(), members);
        let mut stack = vec![start];
        inside.take(start);
        let mut seen = 1;
        while let Some(u) = stack.pop() {
            for &v in self.neighbors(u) {
                if inside.take(v) {
                    seen += 1;
                    stack.push(v);
                }
            }
        }
        seen == inside.len
    }

    /// Members whose removal disconnects the induced subgraph, in ascending
    /// order. Iterative Hopcroft-Tarjan lowpoint search.
    pub fn articulation_areas(&self, members: &[usize]) -> Result<Vec<usize>> {
        if members.len() <= 2 {
            if !self.is_contiguous(members) {
                return Err(Error::Disconnected);
            }
            return Ok(Vec::new());
        }
        let n = self.n();
        const UNSEEN: usize = usize::MAX;
        let mut in_set = vec![false; n];
        for &m in members {
            in_set[m] = true;
        }
        let mut disc = vec![0usize; n];
        let mut low = vec![0usize; n];
        let mut is_cut = vec![false; n];
        let root = members[0];
        let mut timer = 1;
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        let mut root_children = 0;
        // (vertex, parent, next neighbor position)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, UNSEEN, 0)];
        let mut visited = 1;
        while let Some(top) = stack.last_mut() {
            let (u, parent) = (top.0, top.1);
            let nbrs = self.neighbors(u);
            if top.2 < nbrs.len() {
                let v = nbrs[top.2];
                top.2 += 1;
                if !in_set[v] || v == parent {
                    continue;
                }
                if disc[v] == 0 {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    visited += 1;
                    if u == root {
                        root_children += 1;
                    }
                    stack.push((v, u, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if parent != UNSEEN {
                    low[parent] = low[parent].min(low[u]);
                    if parent != root && low[u] >= disc[parent] {
                        is_cut[parent] = true;
                    }
                }
            }
        }
        if visited != members.len() {
            return Err(Error::Disconnected);
        }
        if root_children > 1 {
            is_cut[root] = true;
        }
        let mut cuts: Vec<usize> = members.iter().copied().filter(|&m| is_cut[m]).collect();
        cuts.sort_unstable();
        Ok(cuts)
    }
}

/// Per-region summary used by the move estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    pub count: usize,
    pub mean: f64,
    /// Population variance.
    pub variance: f64,
    pub heterogeneity: f64,
}

impl RegionStats {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let mut values: Vec<f64> = values.into_iter().collect();
        let count = values.len();
        if count == 0 {
            return Self {
                count: 0,
                mean: 0.0,
                variance: 0.0,
                heterogeneity: 0.0,
            };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count as f64;
        let heterogeneity = sorted_pairwise_abs_sum(&mut values);
        Self {
            count,
            mean,
            variance,
            heterogeneity,
        }
    }

    /// True when every field agrees with `other` within relative tolerance.
    pub fn approx_eq(&self, other: &Self, rel_tol: f64) -> bool {
        self.count == other.count
            && crate::approx_eq(self.mean, other.mean, rel_tol)
            && crate::approx_eq(self.variance, other.variance, rel_tol)
            && crate::approx_eq(self.heterogeneity, other.heterogeneity, rel_tol)
    }
}

/// Σ_{i<j} |v_i - v_j| in O(k log k): after sorting, element k contributes
/// v_k·k − (sum of the k smaller values).
fn sorted_pairwise_abs_sum(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    let mut prefix = 0.0;
    let mut total = 0.0;
    for (k, &v) in values.iter().enumerate() {
        total += v * k as f64 - prefix;
        prefix += v;
    }
    total
}

struct MemberMask {
    flags: Vec<bool>,
    len: usize,
}

impl MemberMask {
    fn new(n: usize, members: &[usize]) -> Self {
        let mut flags = vec![false; n];
        let mut len = 0;
        for &m in members {
            if !flags[m] {
                flags[m] = true;
                len += 1;
            }
        }
        Self { flags, len }
    }

    /// Clears the flag, returning whether it was set.
    fn take(&mut self, i: usize) -> bool {
        std::mem::replace(&mut self.flags[i], false)
    }
}
