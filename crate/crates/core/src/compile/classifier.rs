use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BayesNetSpec, CompileError, Result, Variable};

/// Shape of a Bayesian network classifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClassifierStructure {
    /// The class is the only parent of every feature.
    NaiveBayes,
    /// The class and one super-parent feature are parents of every other
    /// feature; the super parent has the class as its only parent.
    Spode { super_parent: String },
    /// Arbitrary `(from, to)` edges; the class may not have parents.
    General { edges: Vec<(String, String)> },
}

/// A classifier: class variable, features, structure and CPTs keyed by
/// variable name.
///
/// CPT columns follow the parent order produced by [`build_classifier`]:
/// the class first, then the super parent, or edge-list order for general
/// structures.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierSpec {
    pub class: Variable,
    pub features: Vec<Variable>,
    pub structure: ClassifierStructure,
    pub cpts: BTreeMap<String, Vec<Vec<f64>>>,
}

impl ClassifierSpec {
    pub fn super_parent(&self) -> Option<&str> {
        match &self.structure {
            ClassifierStructure::Spode { super_parent } => Some(super_parent),
            _ => None,
        }
    }

    /// Parent names of every variable, class first.
    pub fn parent_names(&self) -> Result<Vec<(String, Vec<String>)>> {
        let class = self.class.name.clone();
        let is_feature = |n: &str| self.features.iter().any(|f| f.name == n);
        let mut out = vec![(class.clone(), Vec::new())];
        match &self.structure {
            ClassifierStructure::NaiveBayes => {
                for f in &self.features {
                    out.push((f.name.clone(), vec![class.clone()]));
                }
            }
            ClassifierStructure::Spode { super_parent } => {
                if !is_feature(super_parent) {
                    return Err(CompileError::SuperParentNotFeature(super_parent.clone()));
                }
                out.push((super_parent.clone(), vec![class.clone()]));
                for f in self.features.iter().filter(|f| &f.name != super_parent) {
                    out.push((f.name.clone(), vec![class.clone(), super_parent.clone()]));
                }
            }
            ClassifierStructure::General { edges } => {
                let mut parents: BTreeMap<&str, Vec<String>> = BTreeMap::new();
                for (from, to) in edges {
                    if to == &class {
                        return Err(CompileError::FeatureToClassEdge(from.clone()));
                    }
                    if !is_feature(to) {
                        return Err(CompileError::UnknownVariable(to.clone()));
                    }
                    if from != &class && !is_feature(from) {
                        return Err(CompileError::UnknownVariable(from.clone()));
                    }
                    parents.entry(to).or_default().push(from.clone());
                }
                let mut placed: Vec<bool> = vec![false; self.features.len()];
                let mut done = vec![class.clone()];
                while placed.iter().any(|p| !p) {
                    let next = (0..self.features.len()).find(|&i| {
                        !placed[i]
                            && parents
                                .get(self.features[i].name.as_str())
                                .is_none_or(|ps| ps.iter().all(|p| done.contains(p)))
                    });
                    let Some(i) = next else {
                        let stuck = placed.iter().position(|p| !p).unwrap_or(0);
                        return Err(CompileError::Cycle(self.features[stuck].name.clone()));
                    };
                    placed[i] = true;
                    let name = self.features[i].name.clone();
                    done.push(name.clone());
                    let ps = parents.get(name.as_str()).cloned().unwrap_or_default();
                    out.push((name, ps));
                }
            }
        }
        Ok(out)
    }
}

/// Expands a classifier into a Bayesian network with the class first.
pub fn build_classifier(spec: &ClassifierSpec) -> Result<BayesNetSpec> {
    let order = spec.parent_names()?;
    let lookup = |name: &str| -> Result<Variable> {
        if spec.class.name == name {
            return Ok(spec.class.clone());
        }
        spec.features
            .iter()
            .find(|f| f.name == name)
            .cloned()
            .ok_or_else(|| CompileError::UnknownVariable(name.to_string()))
    };
    let mut variables = Vec::with_capacity(order.len());
    for (name, _) in &order {
        variables.push(lookup(name)?);
    }
    let index = |name: &str| variables.iter().position(|v| v.name == name);
    let mut parents = Vec::with_capacity(order.len());
    let mut cpts = Vec::with_capacity(order.len());
    for (name, ps) in &order {
        parents.push(
            ps.iter()
                .map(|p| index(p).ok_or_else(|| CompileError::UnknownVariable(p.clone())))
                .collect::<Result<Vec<_>>>()?,
        );
        cpts.push(spec.cpts.get(name).cloned().ok_or_else(|| CompileError::CptShape {
            variable: name.clone(),
            detail: "missing CPT".into(),
        })?);
    }
    BayesNetSpec::new(variables, parents, cpts)
}
