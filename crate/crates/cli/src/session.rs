use std::collections::BTreeMap;

use mmsa_core::compile::{atoms_matching, parse_assignment, ClassifierSpec, Compiled};
use mmsa_core::covariation::{Scheme, VariationSpec};
use mmsa_core::model::{AtomEvent, ModelError, MonomialModel, ParameterVector};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceKind {
    #[serde(rename = "bn")]
    Bn,
    #[serde(rename = "tree")]
    Tree,
    #[serde(rename = "classifier")]
    Classifier,
    #[serde(rename = "raw-mm")]
    RawMm,
}

/// Scheme field of a variation: one scheme for every touched block, or a
/// map from parameter keys to the scheme of their block. The key `default`
/// sets the scheme of blocks not named.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemeField {
    Single(Scheme),
    PerBlock(BTreeMap<String, Scheme>),
}

impl Default for SchemeField {
    fn default() -> Self {
        SchemeField::Single(Scheme::Proportional)
    }
}

/// A loaded model: the snapshot every request works on.
#[derive(Debug, Clone)]
pub struct Session {
    pub source: SourceKind,
    pub compiled: Compiled,
    /// Kept for classifier checks on classifier files.
    pub classifier: Option<ClassifierSpec>,
    pub name: Option<String>,
}

impl Session {
    pub fn model(&self) -> &MonomialModel {
        &self.compiled.model
    }

    pub fn theta(&self) -> &ParameterVector {
        &self.compiled.theta
    }

    /// Resolves a parameter by label, alias or 0-based index, in that order.
    /// Returns a warning when a label or alias shadows an index.
    pub fn resolve_param(&self, key: &str) -> Result<(usize, Option<String>)> {
        let key = key.trim();
        let by_name = self
            .theta()
            .labels()
            .iter()
            .position(|l| l == key)
            .or_else(|| self.compiled.aliases.iter().position(|a| a == key));
        let by_index = key.parse::<usize>().ok().filter(|&j| j < self.model().n_params());
        match (by_name, by_index) {
            (Some(j), Some(i)) if i != j => Ok((
                j,
                Some(format!("`{key}` names parameter {} and is also index {i}; using the name", j + 1)),
            )),
            (Some(j), _) | (None, Some(j)) => Ok((j, None)),
            (None, None) => Err(AppError::invalid(
                "UnknownParameter",
                format!("no parameter is labelled, aliased or indexed `{key}`"),
            )),
        }
    }

    /// Resolves several keys, collecting warnings.
    pub fn resolve_params<'a, I>(&self, keys: I, warnings: &mut Vec<String>) -> Result<Vec<usize>>
    where
        I: IntoIterator<Item = &'a str>,
    {
        keys.into_iter()
            .map(|k| {
                let (j, w) = self.resolve_param(k)?;
                warnings.extend(w);
                Ok(j)
            })
            .collect()
    }

    /// Targets keyed by parameter index.
    pub fn targets(
        &self,
        vary: &BTreeMap<String, f64>,
        warnings: &mut Vec<String>,
    ) -> Result<BTreeMap<usize, f64>> {
        let mut out = BTreeMap::new();
        for (key, &value) in vary {
            let (j, w) = self.resolve_param(key)?;
            warnings.extend(w);
            if out.insert(j, value).is_some() {
                return Err(AppError::invalid(
                    "DuplicateParameter",
                    format!("parameter {} is varied twice", j + 1),
                ));
            }
        }
        Ok(out)
    }

    /// Builds a variation from its JSON fields.
    pub fn variation(
        &self,
        vary: &BTreeMap<String, f64>,
        scheme: &SchemeField,
        warnings: &mut Vec<String>,
    ) -> Result<VariationSpec> {
        let targets = self.targets(vary, warnings)?;
        match scheme {
            SchemeField::Single(s) => Ok(VariationSpec::new(targets, *s)?),
            SchemeField::PerBlock(map) => {
                let default = map.get("default").copied().unwrap_or(Scheme::Proportional);
                let mut spec = VariationSpec::new(targets, default)?;
                for (key, &s) in map.iter().filter(|(k, _)| k.as_str() != "default") {
                    let (j, w) = self.resolve_param(key)?;
                    warnings.extend(w);
                    spec = spec.with_block_scheme(self.model().partition().block_of(j), s);
                }
                Ok(spec)
            }
        }
    }

    /// Parses an event.
    ///
    /// `Y3=3,Y1=1` selects atoms by variable states; `all` selects every
    /// atom; otherwise the text is a comma list of atom labels or 0-based
    /// atom indices.
    pub fn event(&self, text: &str) -> Result<AtomEvent> {
        let text = text.trim();
        let model = self.model();
        if text == "all" {
            return Ok(AtomEvent::all(model.n_atoms()));
        }
        if let Some(a) = model.atom_labels().iter().position(|l| l == text) {
            return Ok(AtomEvent::new(vec![a], model.n_atoms())?);
        }
        if text.contains('=') && !self.compiled.layout.variables.is_empty() {
            return Ok(atoms_matching(&self.compiled.layout, &parse_assignment(text)?)?);
        }
        let mut atoms = Vec::new();
        for token in text.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let a = model
                .atom_labels()
                .iter()
                .position(|l| l == token)
                .or_else(|| token.parse::<usize>().ok())
                .ok_or_else(|| {
                    AppError::invalid("UnknownAtom", format!("no atom is labelled or indexed `{token}`"))
                })?;
            if a >= model.n_atoms() {
                return Err(ModelError::AtomOutOfRange { index: a, n_atoms: model.n_atoms() }.into());
            }
            atoms.push(a);
        }
        Ok(AtomEvent::new(atoms, model.n_atoms())?)
    }
}
