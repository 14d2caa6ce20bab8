//! Binary quadratic models, constrained quadratic models and the local
//! samplers that solve them.

mod exhaustive;
pub mod file;
mod sa;
mod solve;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use exhaustive::{solve_cqm_exhaustive, solve_exhaustive, EXHAUSTIVE_CAP};
pub use file::{export_model, import_model, ModelFile};
pub use sa::{solve_sa, SaParams};
pub use solve::{default_penalty, solve_cqm, CqmStrategy, CqmSolveInfo, PENALTY_RETRIES};

/// Which solver stands in for the annealer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    /// Exact enumeration; models above [`EXHAUSTIVE_CAP`] fall back to
    /// annealing.
    Exhaustive,
    Sa,
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(Self::Exhaustive),
            "sa" => Ok(Self::Sa),
            other => Err(Error::InvalidInput(format!("unknown sampler `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampler {
    pub kind: SamplerKind,
    pub sa: SaParams,
}

impl Sampler {
    pub fn exhaustive() -> Self {
        Self {
            kind: SamplerKind::Exhaustive,
            sa: SaParams::default(),
        }
    }

    pub fn sa(params: SaParams) -> Self {
        Self {
            kind: SamplerKind::Sa,
            sa: params,
        }
    }

    /// True when a model of `n` variables will be enumerated exactly.
    pub fn is_exact_for(&self, n: usize) -> bool {
        self.kind == SamplerKind::Exhaustive && n <= EXHAUSTIVE_CAP
    }

    /// Solves a BQM, enumerating when allowed and annealing otherwise.
    pub fn solve_bqm(&self, m: &Bqm, rng_seed: u64) -> SampleResult {
        if self.is_exact_for(m.num_variables()) {
            solve_exhaustive(m).expect("size checked against cap")
        } else {
            if self.kind == SamplerKind::Exhaustive {
                log::info!(
                    "{} variables exceed the exhaustive cap; annealing instead",
                    m.num_variables()
                );
            }
            solve_sa(m, &self.sa.with_seed(rng_seed))
        }
    }

    /// The CQM strategy this sampler uses for a model of `n` variables.
    pub fn cqm_strategy(&self, n: usize, penalty: Option<f64>, rng_seed: u64) -> CqmStrategy {
        if self.is_exact_for(n) {
            CqmStrategy::Exhaustive
        } else {
            CqmStrategy::PenaltySa {
                penalty,
                params: self.sa.with_seed(rng_seed),
            }
        }
    }
}

/// Ordered set of named binary variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Variables {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Variables {
    /// Index of `name`, declaring it if new.
    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        i
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Converts a name-keyed assignment into index order.
    pub fn dense(&self, x: &BTreeMap<String, bool>) -> Result<Vec<bool>> {
        if let Some(unknown) = x.keys().find(|k| !self.index.contains_key(*k)) {
            return Err(Error::UnknownVariable(unknown.clone()));
        }
        self.names
            .iter()
            .map(|n| x.get(n).copied().ok_or_else(|| Error::MissingVariable(n.clone())))
            .collect()
    }

    /// Variable indices sorted by name.
    pub fn lexicographic_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.names[a].cmp(&self.names[b]));
        order
    }
}

/// `offset + Σ linear_i x_i + Σ quadratic_ij x_i x_j` over indexed binaries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Objective {
    pub linear: Vec<f64>,
    /// Canonical `(i, j, coef)` with `i < j`, sorted, one entry per pair.
    pub quadratic: Vec<(usize, usize, f64)>,
    pub offset: f64,
}

impl Objective {
    pub fn value(&self, x: &[bool]) -> f64 {
        debug_assert_eq!(x.len(), self.linear.len());
        let mut e = self.offset;
        for (c, &xi) in self.linear.iter().zip(x) {
            if xi {
                e += c;
            }
        }
        for &(i, j, c) in &self.quadratic {
            if x[i] && x[j] {
                e += c;
            }
        }
        e
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.coefficients().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn min_nonzero_abs_coefficient(&self) -> Option<f64> {
        self.coefficients()
            .map(f64::abs)
            .filter(|&c| c > 0.0)
            .min_by(f64::total_cmp)
    }

    fn coefficients(&self) -> impl Iterator<Item = f64> + '_ {
        self.linear
            .iter()
            .copied()
            .chain(self.quadratic.iter().map(|t| t.2))
    }

    /// Neighbor lists `(other, coef)` for each variable.
    pub(crate) fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.linear.len()];
        for &(i, j, c) in &self.quadratic {
            adj[i].push((j, c));
            adj[j].push((i, c));
        }
        adj
    }
}

/// Accumulates objective terms; duplicate pairs are summed on build.
#[derive(Debug, Clone, Default)]
pub struct ObjectiveBuilder {
    vars: Variables,
    linear: Vec<f64>,
    quadratic: Vec<(usize, usize, f64)>,
    offset: f64,
}

impl ObjectiveBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn variable(&mut self, name: &str) -> usize {
        let i = self.vars.intern(name);
        if i == self.linear.len() {
            self.linear.push(0.0);
        }
        i
    }

    pub fn add_linear(&mut self, name: &str, coef: f64) -> &mut Self {
        let i = self.variable(name);
        self.linear[i] += coef;
        self
    }

    /// Adds `coef · x_a · x_b`. For `a == b` the term folds into the linear
    /// coefficient since `x² = x` for binaries.
    pub fn add_quadratic(&mut self, a: &str, b: &str, coef: f64) -> &mut Self {
        let (i, j) = (self.variable(a), self.variable(b));
        self.add_quadratic_index(i, j, coef);
        self
    }

    pub(crate) fn add_quadratic_index(&mut self, i: usize, j: usize, coef: f64) {
        if i == j {
            self.linear[i] += coef;
        } else {
            self.quadratic.push((i.min(j), i.max(j), coef));
        }
    }

    pub fn add_offset(&mut self, c: f64) -> &mut Self {
        self.offset += c;
        self
    }

    fn finish(mut self) -> (Variables, Objective) {
        self.quadratic.sort_by_key(|t| (t.0, t.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(self.quadratic.len());
        for (i, j, c) in self.quadratic {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += c,
                _ => merged.push((i, j, c)),
            }
        }
        (
            self.vars,
            Objective {
                linear: self.linear,
                quadratic: merged,
                offset: self.offset,
            },
        )
    }

    pub fn build_bqm(self) -> Bqm {
        let (variables, objective) = self.finish();
        Bqm {
            variables,
            objective,
        }
    }

    pub fn build_cqm(self, constraints: Vec<ConstraintSpec>) -> Result<Cqm> {
        let (variables, objective) = self.finish();
        let mut cqm = Cqm {
            variables,
            objective,
            constraints: Vec::with_capacity(constraints.len()),
        };
        for c in constraints {
            cqm.add_constraint(c)?;
        }
        Ok(cqm)
    }
}

/// Binary quadratic model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bqm {
    pub variables: Variables,
    pub objective: Objective,
}

impl Bqm {
    pub fn builder() -> ObjectiveBuilder {
        ObjectiveBuilder::new()
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    /// Energy of an index-ordered assignment.
    pub fn energy(&self, x: &[bool]) -> f64 {
        self.objective.value(x)
    }

    /// Energy of a name-keyed assignment; every variable must be present.
    pub fn energy_named(&self, x: &BTreeMap<String, bool>) -> Result<f64> {
        Ok(self.energy(&self.variables.dense(x)?))
    }

    pub fn linear(&self, name: &str) -> Option<f64> {
        self.variables.get(name).map(|i| self.objective.linear[i])
    }

    pub fn quadratic(&self, a: &str, b: &str) -> Option<f64> {
        let (i, j) = (self.variables.get(a)?, self.variables.get(b)?);
        let key = (i.min(j), i.max(j));
        self.objective
            .quadratic
            .binary_search_by(|t| (t.0, t.1).cmp(&key))
            .ok()
            .map(|k| self.objective.quadratic[k].2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "==")]
    Eq,
}

/// Name-keyed constraint description used while building a [`Cqm`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSpec {
    pub terms: Vec<(String, f64)>,
    pub sense: Sense,
    pub bound: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    /// `(variable index, coefficient)`, one entry per variable.
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub bound: f64,
    pub label: String,
}

/// Slack for constraint evaluation against floating-point left-hand sides.
const CONSTRAINT_TOL: f64 = 1e-9;

impl LinearConstraint {
    pub fn lhs(&self, x: &[bool]) -> f64 {
        self.terms.iter().filter(|t| x[t.0]).map(|t| t.1).sum()
    }

    pub fn holds(&self, x: &[bool]) -> bool {
        let lhs = self.lhs(x);
        match self.sense {
            Sense::Le => lhs <= self.bound + CONSTRAINT_TOL,
            Sense::Eq => (lhs - self.bound).abs() <= CONSTRAINT_TOL,
        }
    }

    /// True for `Σ x_i ≤ 1` with unit coefficients.
    pub fn is_unit_at_most_one(&self) -> bool {
        self.sense == Sense::Le && self.bound == 1.0 && self.terms.iter().all(|t| t.1 == 1.0)
    }
}

/// Quadratic objective over binaries plus linear constraints.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Cqm {
    pub variables: Variables,
    pub objective: Objective,
    pub constraints: Vec<LinearConstraint>,
}

impl Cqm {
    pub fn builder() -> ObjectiveBuilder {
        ObjectiveBuilder::new()
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    /// Adds a constraint over already-declared variables.
    pub fn add_constraint(&mut self, spec: ConstraintSpec) -> Result<()> {
        if spec.terms.is_empty() {
            return Err(Error::InvalidInput(format!("constraint `{}` has no terms", spec.label)));
        }
        if !spec.bound.is_finite() {
            return Err(Error::InvalidInput(format!("constraint `{}` has a non-finite bound", spec.label)));
        }
        let mut terms: Vec<(usize, f64)> = Vec::with_capacity(spec.terms.len());
        for (name, coef) in &spec.terms {
            let i = self
                .variables
                .get(name)
                .ok_or_else(|| Error::UnknownVariable(name.clone()))?;
            match terms.iter_mut().find(|t| t.0 == i) {
                Some(t) => t.1 += coef,
                None => terms.push((i, *coef)),
            }
        }
        self.constraints.push(LinearConstraint {
            terms,
            sense: spec.sense,
            bound: spec.bound,
            label: spec.label,
        });
        Ok(())
    }

    pub fn objective_value(&self, x: &[bool]) -> f64 {
        self.objective.value(x)
    }

    pub fn is_feasible(&self, x: &[bool]) -> bool {
        self.constraints.iter().all(|c| c.holds(x))
    }

    /// Feasibility of a name-keyed assignment; every variable must be present.
    pub fn feasible_named(&self, x: &BTreeMap<String, bool>) -> Result<bool> {
        Ok(self.is_feasible(&self.variables.dense(x)?))
    }

    /// Folds every constraint into pairwise penalties `λ·x_i·x_j`. Only
    /// unit-coefficient `≤ 1` constraints are accepted; they need no slack
    /// variables.
    pub fn to_bqm(&self, penalty: f64) -> Result<Bqm> {
        if !(penalty > 0.0) {
            return Err(Error::InvalidInput(format!("penalty must be positive, got {penalty}")));
        }
        let mut b = ObjectiveBuilder {
            vars: self.variables.clone(),
            linear: self.objective.linear.clone(),
            quadratic: self.objective.quadratic.clone(),
            offset: self.objective.offset,
        };
        for c in &self.constraints {
            if !c.is_unit_at_most_one() {
                return Err(Error::UnsupportedConstraint(c.label.clone()));
            }
            for (k, &(i, _)) in c.terms.iter().enumerate() {
                for &(j, _) in &c.terms[k + 1..] {
                    b.add_quadratic_index(i, j, penalty);
                }
            }
        }
        Ok(b.build_bqm())
    }
}

/// Solver output. `assignment` follows the model's variable order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleResult {
    pub assignment: Vec<bool>,
    /// Model energy (BQM) or objective value (CQM) of `assignment`.
    pub energy: f64,
    pub feasible: bool,
}

impl SampleResult {
    pub fn selected(&self) -> impl Iterator<Item = usize> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i)
    }

    pub fn named(&self, vars: &Variables) -> BTreeMap<String, bool> {
        self.assignment
            .iter()
            .enumerate()
            .map(|(i, &b)| (vars.name(i).to_string(), b))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn named(pairs: &[(&str, bool)]) -> BTreeMap<String, bool> {
        pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
    }

    #[test]
    fn bqm_energy_examples() {
        let mut b = Bqm::builder();
        b.add_linear("a", -1.0);
        let m = b.build_bqm();
        assert_eq!(m.energy_named(&named(&[("a", true)])).unwrap(), -1.0);

        let mut b = Bqm::builder();
        b.add_linear("a", -1.0).add_linear("b", -1.0).add_quadratic("a", "b", 2.0).add_offset(0.5);
        let m = b.build_bqm();
        assert_eq!(m.energy_named(&named(&[("a", true), ("b", true)])).unwrap(), 0.5);
        assert_eq!(m.energy_named(&named(&[("a", false), ("b", false)])).unwrap(), 0.5);
        assert!(matches!(
            m.energy_named(&named(&[("a", true)])),
            Err(Error::MissingVariable(v)) if v == "b"
        ));
    }

    #[test]
    fn duplicate_quadratic_terms_merge() {
        let mut b = Bqm::builder();
        b.add_quadratic("a", "b", 1.0).add_quadratic("b", "a", 2.5).add_quadratic("a", "a", 4.0);
        let m = b.build_bqm();
        assert_eq!(m.objective.quadratic.len(), 1);
        assert_eq!(m.quadratic("b", "a"), Some(3.5));
        assert_eq!(m.linear("a"), Some(4.0));
    }

    fn pair_constraint(names: &[&str]) -> ConstraintSpec {
        ConstraintSpec {
            terms: names.iter().map(|n| (n.to_string(), 1.0)).collect(),
            sense: Sense::Le,
            bound: 1.0,
            label: "c".into(),
        }
    }

    #[test]
    fn cqm_feasibility_examples() {
        let mut b = Cqm::builder();
        b.variable("a");
        b.variable("b");
        let m = b.build_cqm(vec![pair_constraint(&["a", "b"])]).unwrap();
        assert!(m.feasible_named(&named(&[("a", true), ("b", false)])).unwrap());
        assert!(!m.feasible_named(&named(&[("a", true), ("b", true)])).unwrap());

        let mut b = Cqm::builder();
        b.variable("a");
        let free = b.build_cqm(vec![]).unwrap();
        assert!(free.feasible_named(&named(&[("a", true)])).unwrap());
        assert!(free.feasible_named(&named(&[("a", true), ("z", true)])).is_err());
    }

    #[test]
    fn cqm_rejects_undeclared_variables() {
        let mut b = Cqm::builder();
        b.variable("a");
        assert!(matches!(
            b.build_cqm(vec![pair_constraint(&["a", "q"])]),
            Err(Error::UnknownVariable(_))
        ));
    }

    #[test]
    fn penalty_conversion_examples() {
        let mut b = Cqm::builder();
        for v in ["a", "b", "c"] {
            b.variable(v);
        }
        let two = b.clone().build_cqm(vec![pair_constraint(&["a", "b"])]).unwrap();
        let bqm = two.to_bqm(3.0).unwrap();
        assert_eq!(bqm.quadratic("a", "b"), Some(3.0));
        assert_eq!(bqm.objective.quadratic.len(), 1);

        let three = b.build_cqm(vec![pair_constraint(&["a", "b", "c"])]).unwrap();
        let bqm = three.to_bqm(2.0).unwrap();
        for (x, y) in [("a", "b"), ("a", "c"), ("b", "c")] {
            assert_eq!(bqm.quadratic(x, y), Some(2.0));
        }
    }

    #[test]
    fn penalty_conversion_rejects_other_shapes() {
        let mut b = Cqm::builder();
        b.variable("a");
        b.variable("b");
        let mut spec = pair_constraint(&["a", "b"]);
        spec.terms[0].1 = 2.0;
        let m = b.clone().build_cqm(vec![spec]).unwrap();
        assert!(matches!(m.to_bqm(1.0), Err(Error::UnsupportedConstraint(_))));

        let mut spec = pair_constraint(&["a", "b"]);
        spec.sense = Sense::Eq;
        let m = b.clone().build_cqm(vec![spec]).unwrap();
        assert!(m.to_bqm(1.0).is_err());

        let m = b.build_cqm(vec![pair_constraint(&["a", "b"])]).unwrap();
        assert!(m.to_bqm(0.0).is_err());
    }
}
