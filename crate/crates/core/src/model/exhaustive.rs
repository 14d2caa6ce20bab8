//! Exact enumeration solvers, used as correctness oracles and for small
//! move models.

use super::{Bqm, Cqm, Objective, SampleResult, Sense};
use crate::error::{Error, Result};

/// Largest model either exhaustive solver will accept.
pub const EXHAUSTIVE_CAP: usize = 25;

fn tie_tolerance(obj: &Objective) -> f64 {
    let scale: f64 = obj.linear.iter().map(|c| c.abs()).sum::<f64>()
        + obj.quadratic.iter().map(|t| t.2.abs()).sum::<f64>();
    1e-9 * scale.max(1.0)
}

/// Global minimum of a BQM by Gray-code enumeration. Among equal energies
/// the assignment that is lexicographically smallest over variable names
/// (0 before 1) wins.
pub fn solve_exhaustive(m: &Bqm) -> Result<SampleResult> {
    let n = m.num_variables();
    if n > EXHAUSTIVE_CAP {
        return Err(Error::TooManyVariables {
            cap: EXHAUSTIVE_CAP,
            actual: n,
        });
    }
    // Key bit b belongs to the variable at lexicographic rank n-1-b, so a
    // smaller key is a lexicographically smaller assignment.
    let order = m.variables.lexicographic_order();
    let var_of_bit: Vec<usize> = (0..n).map(|b| order[n - 1 - b]).collect();
    let adj = m.objective.adjacency();
    let tol = tie_tolerance(&m.objective);

    let mut x = vec![false; n];
    let mut field = m.objective.linear.clone();
    let mut energy = m.objective.offset;
    let mut best_energy = energy;
    let mut best_key: u32 = 0;
    let mut key: u32 = 0;

    for step in 1u64..(1u64 << n) {
        let bit = step.trailing_zeros() as usize;
        let v = var_of_bit[bit];
        let on = !x[v];
        let sign = if on { 1.0 } else { -1.0 };
        energy += sign * field[v];
        x[v] = on;
        for &(u, c) in &adj[v] {
            field[u] += sign * c;
        }
        key ^= 1 << bit;
        if energy < best_energy - tol || (energy <= best_energy + tol && key < best_key) {
            best_energy = energy;
            best_key = key;
        }
    }

    let mut assignment = vec![false; n];
    for (b, &v) in var_of_bit.iter().enumerate() {
        assignment[v] = best_key >> b & 1 == 1;
    }
    Ok(SampleResult {
        energy: m.energy(&assignment),
        assignment,
        feasible: true,
    })
}

/// Exact minimum of a CQM objective over its feasible set. Depth-first in
/// lexicographic name order with bound-based pruning; ties resolve to the
/// lexicographically smallest feasible assignment. `feasible` is false only
/// when no feasible assignment exists.
pub fn solve_cqm_exhaustive(m: &Cqm) -> Result<SampleResult> {
    let n = m.num_variables();
    if n > EXHAUSTIVE_CAP {
        return Err(Error::TooManyVariables {
            cap: EXHAUSTIVE_CAP,
            actual: n,
        });
    }
    let order = m.variables.lexicographic_order();
    let mut rank = vec![0; n];
    for (r, &v) in order.iter().enumerate() {
        rank[v] = r;
    }
    // quadratic partners that come earlier in the search order
    let mut earlier: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(i, j, c) in &m.objective.quadratic {
        if rank[i] < rank[j] {
            earlier[j].push((i, c));
        } else {
            earlier[i].push((j, c));
        }
    }
    let mut memberships: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut remaining_neg = vec![0.0; m.constraints.len()];
    let mut remaining_pos = vec![0.0; m.constraints.len()];
    for (k, c) in m.constraints.iter().enumerate() {
        for &(v, coef) in &c.terms {
            memberships[v].push((k, coef));
            if coef < 0.0 {
                remaining_neg[k] += coef;
            } else {
                remaining_pos[k] += coef;
            }
        }
    }

    let mut search = Search {
        cqm: m,
        order: &order,
        earlier: &earlier,
        memberships: &memberships,
        x: vec![false; n],
        lhs: vec![0.0; m.constraints.len()],
        remaining_neg,
        remaining_pos,
        tol: tie_tolerance(&m.objective),
        best: None,
    };
    search.descend(0, m.objective.offset);

    Ok(match search.best {
        Some((_, assignment)) => SampleResult {
            energy: m.objective_value(&assignment),
            assignment,
            feasible: true,
        },
        None => {
            let assignment = vec![false; n];
            SampleResult {
                energy: m.objective_value(&assignment),
                assignment,
                feasible: false,
            }
        }
    })
}

const PRUNE_TOL: f64 = 1e-9;

struct Search<'a> {
    cqm: &'a Cqm,
    order: &'a [usize],
    earlier: &'a [Vec<(usize, f64)>],
    memberships: &'a [Vec<(usize, f64)>],
    x: Vec<bool>,
    lhs: Vec<f64>,
    remaining_neg: Vec<f64>,
    remaining_pos: Vec<f64>,
    tol: f64,
    best: Option<(f64, Vec<bool>)>,
}

impl Search<'_> {
    fn reachable(&self, k: usize) -> bool {
        let c = &self.cqm.constraints[k];
        let lo = self.lhs[k] + self.remaining_neg[k];
        let hi = self.lhs[k] + self.remaining_pos[k];
        match c.sense {
            Sense::Le => lo <= c.bound + PRUNE_TOL,
            Sense::Eq => lo <= c.bound + PRUNE_TOL && hi >= c.bound - PRUNE_TOL,
        }
    }

    fn descend(&mut self, depth: usize, value: f64) {
        if depth == self.order.len() {
            let better = match &self.best {
                None => true,
                Some((b, _)) => value < b - self.tol,
            };
            if better && self.cqm.is_feasible(&self.x) {
                self.best = Some((value, self.x.clone()));
            }
            return;
        }
        let v = self.order[depth];
        for &(k, coef) in &self.memberships[v] {
            if coef < 0.0 {
                self.remaining_neg[k] -= coef;
            } else {
                self.remaining_pos[k] -= coef;
            }
        }

        if self.memberships[v].iter().all(|&(k, _)| self.reachable(k)) {
            self.descend(depth + 1, value);
        }

        self.x[v] = true;
        for &(k, coef) in &self.memberships[v] {
            self.lhs[k] += coef;
        }
        if self.memberships[v].iter().all(|&(k, _)| self.reachable(k)) {
            let gain = self.cqm.objective.linear[v]
                + self.earlier[v]
                    .iter()
                    .filter(|(u, _)| self.x[*u])
                    .map(|t| t.1)
                    .sum::<f64>();
            self.descend(depth + 1, value + gain);
        }
        self.x[v] = false;
        for &(k, coef) in &self.memberships[v] {
            self.lhs[k] -= coef;
            if coef < 0.0 {
                self.remaining_neg[k] += coef;
            } else {
                self.remaining_pos[k] += coef;
            }
        }
    }
}
