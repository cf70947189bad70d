//! JSON model files.
//!
//! Four layouts are recognised by their keys: raw monomial models
//! (`exponents`), staged trees (`vertices`), classifiers (`structure`) and
//! Bayesian networks (`variables`). Indices in files are 0-based.

use std::collections::BTreeMap;
use std::path::Path;

use mmsa_core::compile::{
    build_classifier, compile_bn, compile_staged_tree, AtomLayout, BayesNetSpec, ClassifierSpec,
    ClassifierStructure, CompileError, Compiled, StagedTreeSpec, TreeVertex, Variable,
};
use mmsa_core::model::{ExponentMatrix, MonomialModel, ParameterVector, SimplexPartition};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{AppError, Result};
use crate::session::{Session, SourceKind};

/// CPT of one variable: parent configuration key to distribution. A root
/// variable may give its distribution directly.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum CptEntry {
    Direct(Vec<f64>),
    Table(BTreeMap<String, Vec<f64>>),
}

#[derive(Debug, Deserialize)]
struct BayesNetFile {
    variables: Vec<Variable>,
    #[serde(default)]
    parents: BTreeMap<String, Vec<String>>,
    cpts: BTreeMap<String, CptEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum StructureField {
    Named(String),
    Full(ClassifierStructure),
}

#[derive(Debug, Deserialize)]
struct ClassifierFile {
    variables: Vec<Variable>,
    /// Defaults to the first variable.
    class: Option<String>,
    structure: StructureField,
    cpts: BTreeMap<String, CptEntry>,
}

#[derive(Debug, Deserialize)]
struct VertexFile {
    id: String,
    #[serde(default)]
    children: Vec<String>,
    #[serde(default)]
    labels: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct TreeFile {
    vertices: Vec<VertexFile>,
    #[serde(default)]
    stages: Vec<Vec<String>>,
    /// Keyed by vertex id; any member of a stage may carry its distribution.
    #[serde(default)]
    probabilities: BTreeMap<String, Vec<f64>>,
}

/// The raw monomial-model layout, also the output of `compile`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aliases: Option<Vec<String>>,
    pub partition: Vec<Vec<usize>>,
    /// `[row, col]` or `[row, col, exp]`; a missing exponent is 1.
    pub exponents: Vec<Vec<usize>>,
    pub theta: Vec<f64>,
}

/// Reads and compiles a model file.
pub fn load_model(path: &Path) -> Result<Session> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::invalid("Io", format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)?;
    let mut session = parse_model(&value)?;
    session.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    Ok(session)
}

/// Which layout a JSON document uses.
pub fn detect_format(value: &Value) -> Result<SourceKind> {
    let obj = value
        .as_object()
        .ok_or_else(|| AppError::invalid("UnknownFormat", "a model file must be a JSON object"))?;
    if obj.contains_key("exponents") {
        Ok(SourceKind::RawMm)
    } else if obj.contains_key("vertices") {
        Ok(SourceKind::Tree)
    } else if obj.contains_key("structure") {
        Ok(SourceKind::Classifier)
    } else if obj.contains_key("variables") {
        Ok(SourceKind::Bn)
    } else {
        Err(AppError::invalid(
            "UnknownFormat",
            "expected one of the keys exponents, vertices, structure or variables",
        ))
    }
}

/// Compiles a model document of any supported layout.
pub fn parse_model(value: &Value) -> Result<Session> {
    let source = detect_format(value)?;
    let (compiled, classifier) = match source {
        SourceKind::RawMm => (raw_model(serde_json::from_value(value.clone())?)?, None),
        SourceKind::Tree => (tree(serde_json::from_value(value.clone())?)?, None),
        SourceKind::Bn => (bayes_net(serde_json::from_value(value.clone())?)?, None),
        SourceKind::Classifier => {
            let spec = classifier(serde_json::from_value(value.clone())?)?;
            (compile_bn(&build_classifier(&spec)?)?, Some(spec))
        }
    };
    Ok(Session { source, compiled, classifier, name: None })
}

/// Parent configuration keys in enumeration order, last parent fastest.
fn config_keys(parents: &[&Variable]) -> Vec<String> {
    let mut keys = vec![Vec::<&str>::new()];
    for p in parents {
        keys = keys
            .into_iter()
            .flat_map(|prefix| {
                p.states.iter().map(move |s| {
                    let mut k = prefix.clone();
                    k.push(s.as_str());
                    k
                })
            })
            .collect();
    }
    keys.into_iter().map(|k| k.join(",")).collect()
}

fn normalise_key(key: &str) -> String {
    key.split(',').map(str::trim).collect::<Vec<_>>().join(",")
}

/// Orders a CPT's columns by parent configuration.
fn cpt_columns(name: &str, entry: &CptEntry, parents: &[&Variable]) -> Result<Vec<Vec<f64>>> {
    let keys = config_keys(parents);
    let shape = |detail: String| CompileError::CptShape { variable: name.to_string(), detail };
    match entry {
        CptEntry::Direct(probs) if parents.is_empty() => Ok(vec![probs.clone()]),
        CptEntry::Direct(_) => {
            Err(shape("a variable with parents needs one distribution per parent configuration".into()).into())
        }
        CptEntry::Table(table) => {
            let table: BTreeMap<String, &Vec<f64>> =
                table.iter().map(|(k, v)| (normalise_key(k), v)).collect();
            if let Some(extra) = table.keys().find(|k| !keys.contains(k)) {
                return Err(shape(format!("unknown parent configuration [{extra}]")).into());
            }
            keys.iter()
                .map(|k| {
                    table
                        .get(k)
                        .map(|v| (*v).clone())
                        .ok_or_else(|| shape(format!("missing parent configuration [{k}]")).into())
                })
                .collect()
        }
    }
}

fn lookup<'a>(variables: &'a [Variable], name: &str) -> Result<&'a Variable> {
    variables
        .iter()
        .find(|v| v.name == name)
        .ok_or_else(|| CompileError::UnknownVariable(name.to_string()).into())
}

fn bayes_net(file: BayesNetFile) -> Result<Compiled> {
    if let Some(name) = file.parents.keys().chain(file.cpts.keys()).find(|n| lookup(&file.variables, n).is_err()) {
        return Err(CompileError::UnknownVariable(name.clone()).into());
    }
    let mut parents = Vec::with_capacity(file.variables.len());
    let mut cpts = Vec::with_capacity(file.variables.len());
    for var in &file.variables {
        let names = file.parents.get(&var.name).cloned().unwrap_or_default();
        let vars = names.iter().map(|n| lookup(&file.variables, n)).collect::<Result<Vec<_>>>()?;
        parents.push(
            names
                .iter()
                .map(|n| file.variables.iter().position(|v| &v.name == n).unwrap_or(0))
                .collect(),
        );
        let entry = file.cpts.get(&var.name).ok_or_else(|| CompileError::CptShape {
            variable: var.name.clone(),
            detail: "missing CPT".into(),
        })?;
        cpts.push(cpt_columns(&var.name, entry, &vars)?);
    }
    Ok(compile_bn(&BayesNetSpec::new(file.variables, parents, cpts)?)?)
}

fn classifier(file: ClassifierFile) -> Result<ClassifierSpec> {
    let class_name = match &file.class {
        Some(c) => c.clone(),
        None => file
            .variables
            .first()
            .map(|v| v.name.clone())
            .ok_or_else(|| AppError::invalid("CptShape", "a classifier needs a class variable"))?,
    };
    let class = lookup(&file.variables, &class_name)?.clone();
    let features: Vec<Variable> = file.variables.iter().filter(|v| v.name != class_name).cloned().collect();
    let structure = match file.structure {
        StructureField::Full(s) => s,
        StructureField::Named(n) if n == "naive_bayes" => ClassifierStructure::NaiveBayes,
        StructureField::Named(n) => {
            return Err(AppError::invalid(
                "UnknownStructure",
                format!("unknown structure `{n}`; expected naive_bayes or an object with a type field"),
            ))
        }
    };
    let mut spec = ClassifierSpec { class, features, structure, cpts: BTreeMap::new() };
    for (name, parent_names) in spec.parent_names()? {
        let parents =
            parent_names.iter().map(|n| lookup(&file.variables, n)).collect::<Result<Vec<_>>>()?;
        let entry = file.cpts.get(&name).ok_or_else(|| CompileError::CptShape {
            variable: name.clone(),
            detail: "missing CPT".into(),
        })?;
        let columns = cpt_columns(&name, entry, &parents)?;
        spec.cpts.insert(name, columns);
    }
    Ok(spec)
}

fn tree(file: TreeFile) -> Result<Compiled> {
    let index: BTreeMap<&str, usize> =
        file.vertices.iter().enumerate().map(|(i, v)| (v.id.as_str(), i)).collect();
    if index.len() != file.vertices.len() {
        return Err(CompileError::NotATree("duplicate vertex id".into()).into());
    }
    let find = |id: &str| {
        index
            .get(id)
            .copied()
            .ok_or_else(|| AppError::from(CompileError::NotATree(format!("unknown vertex `{id}`"))))
    };
    let mut vertices = Vec::with_capacity(file.vertices.len());
    for v in &file.vertices {
        let children = v.children.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;
        vertices.push(TreeVertex { id: v.id.clone(), children, labels: v.labels.clone() });
    }
    let stages = file
        .stages
        .iter()
        .map(|s| s.iter().map(|id| find(id)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let probabilities = file
        .probabilities
        .iter()
        .map(|(id, p)| Ok((find(id)?, p.clone())))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(compile_staged_tree(&StagedTreeSpec::new(vertices, stages, probabilities)?)?)
}

fn raw_model(file: RawModelFile) -> Result<Compiled> {
    let n_params = file.params.as_ref().map_or(file.theta.len(), Vec::len);
    let mut triples = Vec::with_capacity(file.exponents.len());
    for entry in &file.exponents {
        match entry.as_slice() {
            [r, c] => triples.push((*r, *c, 1u32)),
            [r, c, e] => triples.push((*r, *c, u32::try_from(*e).unwrap_or(u32::MAX))),
            _ => {
                return Err(AppError::invalid(
                    "ShapeMismatch",
                    format!("exponent entry {entry:?} must be [row, col] or [row, col, exp]"),
                ))
            }
        }
    }
    let n_atoms = match &file.atoms {
        Some(a) => a.len(),
        None => triples.iter().map(|t| t.0 + 1).max().unwrap_or(0),
    };
    let matrix = ExponentMatrix::from_triples(n_atoms, n_params, triples)?;
    let partition = SimplexPartition::new(n_params, file.partition)?;
    let atom_labels = file.atoms.unwrap_or_else(|| (1..=n_atoms).map(|i| format!("y{i}")).collect());
    let labels = file.params.unwrap_or_else(|| (1..=n_params).map(|i| format!("theta{i}")).collect());
    let aliases = file.aliases.unwrap_or_else(|| labels.clone());
    if aliases.len() != n_params {
        return Err(AppError::invalid(
            "ShapeMismatch",
            format!("{} aliases for {n_params} parameters", aliases.len()),
        ));
    }
    let model = MonomialModel::new(matrix, partition, atom_labels)?;
    let theta = ParameterVector::new(file.theta, labels)?;
    Ok(Compiled {
        layout: AtomLayout::new(Vec::new(), vec![Vec::new(); model.n_atoms()]),
        model,
        theta,
        aliases,
        block_variables: None,
    })
}

/// The compiled model in the raw layout.
pub fn to_raw_model(compiled: &Compiled) -> RawModelFile {
    let model = &compiled.model;
    RawModelFile {
        atoms: Some(model.atom_labels().to_vec()),
        params: Some(compiled.theta.labels().to_vec()),
        aliases: Some(compiled.aliases.clone()),
        partition: model.partition().blocks().to_vec(),
        exponents: model
            .matrix()
            .triples()
            .map(|(r, c, e)| if e == 1 { vec![r, c] } else { vec![r, c, e as usize] })
            .collect(),
        theta: compiled.theta.values().to_vec(),
    }
}
