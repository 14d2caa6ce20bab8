//! JSON interchange format for handing models to an external sampler.
//!
//! ```json
//! {"type": "cqm", "variables": ["m_3_1_2"], "linear": {"m_3_1_2": -1.5},
//!  "quadratic": [], "offset": 0.0,
//!  "constraints": [{"terms": {"m_3_1_2": 1.0}, "sense": "<=", "bound": 1.0, "label": "area_3"}]}
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Bqm, ConstraintSpec, Cqm, ObjectiveBuilder, Objective, Sense, Variables};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRecord {
    pub terms: BTreeMap<String, f64>,
    pub sense: Sense,
    pub bound: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ModelFile {
    Bqm {
        variables: Vec<String>,
        linear: BTreeMap<String, f64>,
        quadratic: Vec<(String, String, f64)>,
        offset: f64,
    },
    Cqm {
        variables: Vec<String>,
        linear: BTreeMap<String, f64>,
        quadratic: Vec<(String, String, f64)>,
        offset: f64,
        constraints: Vec<ConstraintRecord>,
    },
}

fn objective_records(
    vars: &Variables,
    obj: &Objective,
) -> (Vec<String>, BTreeMap<String, f64>, Vec<(String, String, f64)>) {
    let linear = obj
        .linear
        .iter()
        .enumerate()
        .map(|(i, &c)| (vars.name(i).to_string(), c))
        .collect();
    let quadratic = obj
        .quadratic
        .iter()
        .map(|&(i, j, c)| (vars.name(i).to_string(), vars.name(j).to_string(), c))
        .collect();
    (vars.names().to_vec(), linear, quadratic)
}

impl From<&Bqm> for ModelFile {
    fn from(m: &Bqm) -> Self {
        let (variables, linear, quadratic) = objective_records(&m.variables, &m.objective);
        ModelFile::Bqm {
            variables,
            linear,
            quadratic,
            offset: m.objective.offset,
        }
    }
}

impl From<&Cqm> for ModelFile {
    fn from(m: &Cqm) -> Self {
        let (variables, linear, quadratic) = objective_records(&m.variables, &m.objective);
        let constraints = m
            .constraints
            .iter()
            .map(|c| ConstraintRecord {
                terms: c
                    .terms
                    .iter()
                    .map(|&(i, coef)| (m.variables.name(i).to_string(), coef))
                    .collect(),
                sense: c.sense,
                bound: c.bound,
                label: c.label.clone(),
            })
            .collect();
        ModelFile::Cqm {
            variables,
            linear,
            quadratic,
            offset: m.objective.offset,
            constraints,
        }
    }
}

fn objective_builder(
    variables: &[String],
    linear: &BTreeMap<String, f64>,
    quadratic: &[(String, String, f64)],
    offset: f64,
) -> Result<ObjectiveBuilder> {
    let mut b = ObjectiveBuilder::new();
    for v in variables {
        b.variable(v);
    }
    let known = |name: &String, b: &ObjectiveBuilder| {
        b.vars
            .get(name)
            .map(|_| ())
            .ok_or_else(|| Error::UnknownVariable(name.clone()))
    };
    for (name, &c) in linear {
        known(name, &b)?;
        b.add_linear(name, c);
    }
    for (u, v, c) in quadratic {
        known(u, &b)?;
        known(v, &b)?;
        b.add_quadratic(u, v, *c);
    }
    b.add_offset(offset);
    Ok(b)
}

impl ModelFile {
    pub fn into_bqm(self) -> Result<Bqm> {
        match self {
            ModelFile::Bqm {
                variables,
                linear,
                quadratic,
                offset,
            } => Ok(objective_builder(&variables, &linear, &quadratic, offset)?.build_bqm()),
            ModelFile::Cqm { .. } => Err(Error::InvalidInput("model file holds a cqm, not a bqm".into())),
        }
    }

    pub fn into_cqm(self) -> Result<Cqm> {
        match self {
            ModelFile::Cqm {
                variables,
                linear,
                quadratic,
                offset,
                constraints,
            } => {
                let b = objective_builder(&variables, &linear, &quadratic, offset)?;
                b.build_cqm(
                    constraints
                        .into_iter()
                        .map(|c| ConstraintSpec {
                            terms: c.terms.into_iter().collect(),
                            sense: c.sense,
                            bound: c.bound,
                            label: c.label,
                        })
                        .collect(),
                )
            }
            ModelFile::Bqm { .. } => Err(Error::InvalidInput("model file holds a bqm, not a cqm".into())),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model records always serialize")
    }
}

pub fn export_model(model: impl Into<ModelFile>, path: &Path) -> Result<()> {
    fs::write(path, model.into().to_json()).map_err(|e| Error::io(path, e))
}

pub fn import_model(path: &Path) -> Result<ModelFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn offset_and_constraint_count_in_file() {
        let mut b = Bqm::builder();
        b.add_linear("x_0", -1.0).add_offset(2.5);
        let json = ModelFile::from(&b.build_bqm()).to_json();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["type"], "bqm");
        assert_eq!(v["offset"], 2.5);

        let mut b = Cqm::builder();
        b.add_linear("a", -1.0).add_linear("b", 1.0);
        let spec = |l: &str| ConstraintSpec {
            terms: vec![("a".into(), 1.0), ("b".into(), 1.0)],
            sense: Sense::Le,
            bound: 1.0,
            label: l.into(),
        };
        let cqm = b.build_cqm(vec![spec("c1"), spec("c2")]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&ModelFile::from(&cqm).to_json()).unwrap();
        assert_eq!(v["type"], "cqm");
        assert_eq!(v["constraints"].as_array().unwrap().len(), 2);
        assert_eq!(v["constraints"][0]["sense"], "<=");
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let mut b = Cqm::builder();
        b.add_linear("a", 0.1 + 0.2).add_quadratic("a", "b", -1.0 / 3.0).add_offset(1e-17);
        let cqm = b
            .build_cqm(vec![ConstraintSpec {
                terms: vec![("b".into(), 1.0)],
                sense: Sense::Eq,
                bound: 0.0,
                label: "pin".into(),
            }])
            .unwrap();
        export_model(&cqm, &path).unwrap();
        assert_eq!(import_model(&path).unwrap().into_cqm().unwrap(), cqm);
        assert!(import_model(&path).unwrap().into_bqm().is_err());
    }

    proptest! {
        #[test]
        fn bqm_round_trips_losslessly(
            lin in prop::collection::vec(any::<f64>().prop_filter("finite", |c| c.is_finite()), 1..8),
            quad in prop::collection::vec((0usize..8, 0usize..8, -1e6f64..1e6), 0..12),
            offset in -1e12f64..1e12,
        ) {
            let mut b = Bqm::builder();
            for (i, c) in lin.iter().enumerate() {
                b.add_linear(&format!("x_{i}"), *c);
            }
            for (i, j, c) in quad {
                let (i, j) = (i % lin.len(), j % lin.len());
                if i != j {
                    b.add_quadratic(&format!("x_{i}"), &format!("x_{j}"), c);
                }
            }
            b.add_offset(offset);
            let m = b.build_bqm();
            let text = ModelFile::from(&m).to_json();
            let back: ModelFile = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back.into_bqm().unwrap(), m);
        }
    }
}
