//! Front ends that turn graphical models into monomial models.
//!
//! Bayesian networks, staged trees and BN classifiers all compile into a
//! [`Compiled`] bundle: the [`MonomialModel`], its parameter vector, short
//! parameter aliases and an [`AtomLayout`] that maps variable-level events
//! onto atom sets.

mod bayes_net;
mod classifier;
mod layout;
mod staged_tree;

use thiserror::Error;

use crate::model::{ModelError, MonomialModel, ParameterVector};

pub use bayes_net::{compile_bn, BayesNetSpec, Variable};
pub use classifier::{build_classifier, ClassifierSpec, ClassifierStructure};
pub use layout::{atoms_matching, parse_assignment, AtomLayout};
pub use staged_tree::{compile_staged_tree, StagedTreeSpec, TreeVertex};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error("variable `{0}` is declared twice")]
    DuplicateVariable(String),
    #[error("variable `{0}` needs at least two states")]
    TooFewStates(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{variable}` has no state `{state}`")]
    UnknownState { variable: String, state: String },
    #[error("parent `{parent}` of `{child}` does not precede it in the variable order")]
    ParentNotEarlier { child: String, parent: String },
    #[error("parent `{parent}` listed twice for `{child}`")]
    DuplicateParent { child: String, parent: String },
    #[error("CPT of `{variable}`: {detail}")]
    CptShape { variable: String, detail: String },
    #[error("CPT column of `{variable}` for parent configuration [{config}] sums to {sum}")]
    NonSimplexCpt { variable: String, config: String, sum: f64 },
    #[error("CPT of `{variable}` for parent configuration [{config}] has non-positive entry {value}")]
    NonPositiveProbability { variable: String, config: String, value: f64 },
    #[error("not a rooted tree: {0}")]
    NotATree(String),
    #[error("vertex `{0}` has a single child; every non-leaf vertex needs at least two edges")]
    SingleChild(String),
    #[error("vertex `{vertex}` has {found} edge labels for {expected} children")]
    LabelCount { vertex: String, expected: usize, found: usize },
    #[error("leaf `{0}` cannot belong to a stage")]
    StagedLeaf(String),
    #[error("vertex `{0}` is assigned to more than one stage")]
    DuplicateStageMember(String),
    #[error("stage of `{first}` mixes out-degrees: `{first}` has {first_degree} edges, `{other}` has {other_degree}")]
    StageOutDegree { first: String, first_degree: usize, other: String, other_degree: usize },
    #[error("vertices `{first}` and `{second}` share a stage and lie on one root-to-leaf path; the model would not be multilinear")]
    SameStageOnPath { first: String, second: String },
    #[error("no edge probabilities given for the stage of `{0}`")]
    MissingStageProbabilities(String),
    #[error("conflicting edge probabilities given within the stage of `{0}`")]
    ConflictingStageProbabilities(String),
    #[error("edge probabilities of `{vertex}`: {detail}")]
    InvalidEdgeProbabilities { vertex: String, detail: String },
    #[error("feature `{0}` is a parent of the class variable; features may not have class children")]
    FeatureToClassEdge(String),
    #[error("super parent `{0}` is not a feature")]
    SuperParentNotFeature(String),
    #[error("feature dependencies contain a cycle through `{0}`")]
    Cycle(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl CompileError {
    pub fn code(&self) -> &'static str {
        match self {
            CompileError::DuplicateVariable(_) => "DuplicateVariable",
            CompileError::TooFewStates(_) => "TooFewStates",
            CompileError::UnknownVariable(_) => "UnknownVariable",
            CompileError::UnknownState { .. } => "UnknownState",
            CompileError::ParentNotEarlier { .. } => "ParentNotEarlier",
            CompileError::DuplicateParent { .. } => "DuplicateParent",
            CompileError::CptShape { .. } => "CptShape",
            CompileError::NonSimplexCpt { .. } => "NonSimplexCpt",
            CompileError::NonPositiveProbability { .. } => "NonPositiveProbability",
            CompileError::NotATree(_) => "NotATree",
            CompileError::SingleChild(_) => "SingleChild",
            CompileError::LabelCount { .. } => "LabelCount",
            CompileError::StagedLeaf(_) => "StagedLeaf",
            CompileError::DuplicateStageMember(_) => "DuplicateStageMember",
            CompileError::StageOutDegree { .. } => "StageOutDegree",
            CompileError::SameStageOnPath { .. } => "SameStageOnPath",
            CompileError::MissingStageProbabilities(_) => "MissingStageProbabilities",
            CompileError::ConflictingStageProbabilities(_) => "ConflictingStageProbabilities",
            CompileError::InvalidEdgeProbabilities { .. } => "InvalidEdgeProbabilities",
            CompileError::FeatureToClassEdge(_) => "FeatureToClassEdge",
            CompileError::SuperParentNotFeature(_) => "SuperParentNotFeature",
            CompileError::Cycle(_) => "Cycle",
            CompileError::Model(e) => e.code(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CompileError>;

/// Output of every front end.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub model: MonomialModel,
    pub theta: ParameterVector,
    /// Short parameter names such as `theta21`, unique within the model.
    pub aliases: Vec<String>,
    pub layout: AtomLayout,
    /// For Bayesian networks, the variable (index into `layout.variables`)
    /// owning each simplex block.
    pub block_variables: Option<Vec<usize>>,
}

/// Replaces colliding aliases by their long labels.
pub(crate) fn dedup_aliases(aliases: Vec<String>, labels: &[String]) -> Vec<String> {
    let mut counts = std::collections::HashMap::new();
    for a in &aliases {
        *counts.entry(a.clone()).or_insert(0usize) += 1;
    }
    aliases
        .into_iter()
        .zip(labels)
        .map(|(a, l)| if counts[&a] > 1 { l.clone() } else { a })
        .collect()
}
