use std::collections::{BTreeMap, VecDeque};

use super::{dedup_aliases, AtomLayout, CompileError, Compiled, Result, Variable};
use crate::model::{ExponentMatrix, MonomialModel, ParameterVector, SimplexPartition, SUM_TOLERANCE};

/// A tree vertex; `labels[i]` names the edge to `children[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeVertex {
    pub id: String,
    pub children: Vec<usize>,
    pub labels: Vec<String>,
}

impl TreeVertex {
    pub fn new(id: impl Into<String>, children: Vec<usize>, labels: &[&str]) -> Self {
        TreeVertex {
            id: id.into(),
            children,
            labels: labels.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn leaf(id: impl Into<String>) -> Self {
        TreeVertex { id: id.into(), children: Vec::new(), labels: Vec::new() }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// A validated staged tree.
#[derive(Debug, Clone, PartialEq)]
pub struct StagedTreeSpec {
    vertices: Vec<TreeVertex>,
    root: usize,
    stages: Vec<Vec<usize>>,
    stage_of: Vec<Option<usize>>,
    stage_probabilities: Vec<Vec<f64>>,
}

impl StagedTreeSpec {
    /// Builds and validates a staged tree.
    ///
    /// `stages` lists the non-trivial stage groups; every non-leaf vertex not
    /// mentioned becomes a stage of its own. `probabilities` maps vertex
    /// indices to their outgoing edge distributions; each stage needs at least
    /// one member with a distribution, and members that give one must agree.
    /// Missing edge labels default to `1..n`.
    pub fn new(
        mut vertices: Vec<TreeVertex>,
        stages: Vec<Vec<usize>>,
        probabilities: BTreeMap<usize, Vec<f64>>,
    ) -> Result<Self> {
        let n = vertices.len();
        if n == 0 {
            return Err(CompileError::NotATree("no vertices".into()));
        }
        let mut parent = vec![None; n];
        for (v, vertex) in vertices.iter().enumerate() {
            for &c in &vertex.children {
                if c >= n {
                    return Err(CompileError::NotATree(format!(
                        "vertex `{}` has a child index {c} out of range",
                        vertex.id
                    )));
                }
                if parent[c].is_some() || c == v {
                    return Err(CompileError::NotATree(format!(
                        "vertex `{}` has more than one parent",
                        vertices[c].id
                    )));
                }
                parent[c] = Some(v);
            }
        }
        let roots: Vec<usize> = (0..n).filter(|&v| parent[v].is_none()).collect();
        let root = match roots.as_slice() {
            [r] => *r,
            [] => return Err(CompileError::NotATree("no root vertex".into())),
            _ => {
                return Err(CompileError::NotATree(format!(
                    "{} vertices without a parent",
                    roots.len()
                )))
            }
        };
        let mut reached = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            reached += 1;
            queue.extend(vertices[v].children.iter().copied());
        }
        if reached != n {
            return Err(CompileError::NotATree("some vertices are unreachable from the root".into()));
        }

        for vertex in &mut vertices {
            let degree = vertex.children.len();
            if degree == 1 {
                return Err(CompileError::SingleChild(vertex.id.clone()));
            }
            if vertex.labels.is_empty() {
                vertex.labels = (1..=degree).map(|i| i.to_string()).collect();
            }
            if vertex.labels.len() != degree {
                return Err(CompileError::LabelCount {
                    vertex: vertex.id.clone(),
                    expected: degree,
                    found: vertex.labels.len(),
                });
            }
        }

        let mut stage_of = vec![None; n];
        let mut all_stages = Vec::new();
        for group in stages.into_iter().filter(|g| !g.is_empty()) {
            let s = all_stages.len();
            for &v in &group {
                let vertex = vertices.get(v).ok_or_else(|| {
                    CompileError::NotATree(format!("stage member index {v} out of range"))
                })?;
                if vertex.is_leaf() {
                    return Err(CompileError::StagedLeaf(vertex.id.clone()));
                }
                if stage_of[v].replace(s).is_some() {
                    return Err(CompileError::DuplicateStageMember(vertex.id.clone()));
                }
            }
            all_stages.push(group);
        }
        for v in 0..n {
            if !vertices[v].is_leaf() && stage_of[v].is_none() {
                stage_of[v] = Some(all_stages.len());
                all_stages.push(vec![v]);
            }
        }

        let mut stage_probabilities = Vec::with_capacity(all_stages.len());
        for group in &all_stages {
            let first = group[0];
            let degree = vertices[first].children.len();
            if let Some(&other) = group.iter().find(|&&v| vertices[v].children.len() != degree) {
                return Err(CompileError::StageOutDegree {
                    first: vertices[first].id.clone(),
                    first_degree: degree,
                    other: vertices[other].id.clone(),
                    other_degree: vertices[other].children.len(),
                });
            }
            let mut chosen: Option<&Vec<f64>> = None;
            for &v in group {
                let Some(probs) = probabilities.get(&v) else { continue };
                check_edge_probabilities(&vertices[v], probs)?;
                match chosen {
                    None => chosen = Some(probs),
                    Some(c) => {
                        if c.iter().zip(probs).any(|(a, b)| (a - b).abs() > SUM_TOLERANCE) {
                            return Err(CompileError::ConflictingStageProbabilities(
                                vertices[first].id.clone(),
                            ));
                        }
                    }
                }
            }
            let probs = chosen
                .ok_or_else(|| CompileError::MissingStageProbabilities(vertices[first].id.clone()))?;
            stage_probabilities.push(probs.clone());
        }
        if let Some(&v) = probabilities.keys().find(|&&v| v >= n || vertices[v].is_leaf()) {
            return Err(CompileError::InvalidEdgeProbabilities {
                vertex: vertices.get(v).map(|x| x.id.clone()).unwrap_or(v.to_string()),
                detail: "not a non-leaf vertex of the tree".into(),
            });
        }

        Ok(StagedTreeSpec { vertices, root, stages: all_stages, stage_of, stage_probabilities })
    }

    pub fn vertices(&self) -> &[TreeVertex] {
        &self.vertices
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// All stages, including singleton stages of unidentified vertices.
    pub fn stages(&self) -> &[Vec<usize>] {
        &self.stages
    }

    pub fn stage_of(&self, v: usize) -> Option<usize> {
        self.stage_of[v]
    }

    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v.id == id)
    }
}

fn check_edge_probabilities(vertex: &TreeVertex, probs: &[f64]) -> Result<()> {
    let fail = |detail: String| CompileError::InvalidEdgeProbabilities { vertex: vertex.id.clone(), detail };
    if probs.len() != vertex.children.len() {
        return Err(fail(format!("{} values for {} edges", probs.len(), vertex.children.len())));
    }
    if let Some(p) = probs.iter().find(|&&p| !(p > 0.0)) {
        return Err(fail(format!("non-positive value {p}")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(fail(format!("values sum to {sum}")));
    }
    Ok(())
}

/// Compiles a staged tree into a multilinear monomial model.
///
/// Atoms are root-to-leaf paths in depth-first order. Each stage becomes one
/// simplex block, numbered in breadth-first discovery order; its parameters
/// follow the edge order of the stage's vertices.
pub fn compile_staged_tree(spec: &StagedTreeSpec) -> Result<Compiled> {
    let vertices = spec.vertices();

    let mut block_of_stage = vec![usize::MAX; spec.stages().len()];
    let mut stage_rep = Vec::new();
    let mut queue = VecDeque::from([spec.root()]);
    while let Some(v) = queue.pop_front() {
        if let Some(s) = spec.stage_of(v) {
            if block_of_stage[s] == usize::MAX {
                block_of_stage[s] = stage_rep.len();
                stage_rep.push((s, v));
            }
        }
        queue.extend(vertices[v].children.iter().copied());
    }

    let mut offsets = Vec::with_capacity(stage_rep.len());
    let mut blocks = Vec::with_capacity(stage_rep.len());
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut aliases = Vec::new();
    for &(s, rep) in &stage_rep {
        let start = values.len();
        offsets.push(start);
        let probs = &spec.stage_probabilities[s];
        blocks.push((start..start + probs.len()).collect::<Vec<_>>());
        for (slot, &p) in probs.iter().enumerate() {
            let edge = &vertices[rep].labels[slot];
            values.push(p);
            labels.push(format!("{}:{}", vertices[rep].id, edge));
            aliases.push(edge.clone());
        }
    }

    // Depth-first walk collecting one row per leaf.
    let mut supports = Vec::new();
    let mut atom_labels = Vec::new();
    let mut paths: Vec<Vec<String>> = Vec::new();
    let mut path_params = Vec::new();
    let mut path_edges = Vec::new();
    let mut path_stages: Vec<(usize, usize)> = Vec::new();
    walk(
        spec,
        spec.root(),
        &block_of_stage,
        &offsets,
        &mut Walk {
            path_params: &mut path_params,
            path_edges: &mut path_edges,
            path_stages: &mut path_stages,
            supports: &mut supports,
            atom_labels: &mut atom_labels,
            paths: &mut paths,
        },
    )?;

    let depth = paths.iter().map(Vec::len).max().unwrap_or(0);
    let mut levels: Vec<Variable> = (1..=depth)
        .map(|d| Variable { name: format!("level{d}"), states: Vec::new() })
        .collect();
    let atom_states = paths
        .iter()
        .map(|edges| {
            (0..depth)
                .map(|d| {
                    let label = edges.get(d)?;
                    let states = &mut levels[d].states;
                    Some(states.iter().position(|s| s == label).unwrap_or_else(|| {
                        states.push(label.clone());
                        states.len() - 1
                    }))
                })
                .collect()
        })
        .collect();

    let k = values.len();
    let matrix = ExponentMatrix::from_supports(k, supports)?;
    let partition = SimplexPartition::new(k, blocks)?;
    let model = MonomialModel::new(matrix, partition, atom_labels)?;
    let aliases = dedup_aliases(aliases, &labels);
    let theta = ParameterVector::new(values, labels)?;
    Ok(Compiled {
        model,
        theta,
        aliases,
        layout: AtomLayout::new(levels, atom_states),
        block_variables: None,
    })
}

struct Walk<'a> {
    path_params: &'a mut Vec<usize>,
    path_edges: &'a mut Vec<String>,
    path_stages: &'a mut Vec<(usize, usize)>,
    supports: &'a mut Vec<Vec<usize>>,
    atom_labels: &'a mut Vec<String>,
    paths: &'a mut Vec<Vec<String>>,
}

fn walk(
    spec: &StagedTreeSpec,
    v: usize,
    block_of_stage: &[usize],
    offsets: &[usize],
    w: &mut Walk<'_>,
) -> Result<()> {
    let vertex = &spec.vertices()[v];
    let Some(stage) = spec.stage_of(v) else {
        w.supports.push(w.path_params.clone());
        w.atom_labels.push(vertex.id.clone());
        w.paths.push(w.path_edges.clone());
        return Ok(());
    };
    if let Some(&(_, first)) = w.path_stages.iter().find(|&&(s, _)| s == stage) {
        return Err(CompileError::SameStageOnPath {
            first: spec.vertices()[first].id.clone(),
            second: vertex.id.clone(),
        });
    }
    w.path_stages.push((stage, v));
    let offset = offsets[block_of_stage[stage]];
    for (slot, &child) in vertex.children.iter().enumerate() {
        w.path_params.push(offset + slot);
        w.path_edges.push(vertex.labels[slot].clone());
        walk(spec, child, block_of_stage, offsets, w)?;
        w.path_params.pop();
        w.path_edges.pop();
    }
    w.path_stages.pop();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Regularity;

    /// root -> (a, leaf, leaf), a -> three leaves.
    fn two_stage() -> StagedTreeSpec {
        let vertices = vec![
            TreeVertex::new("v0", vec![1, 2, 3], &["theta1", "theta2", "theta3"]),
            TreeVertex::new("v1", vec![4, 5, 6], &["psi1", "psi2", "psi3"]),
            TreeVertex::leaf("y4"),
            TreeVertex::leaf("y5"),
            TreeVertex::leaf("y1"),
            TreeVertex::leaf("y2"),
            TreeVertex::leaf("y3"),
        ];
        let probs = BTreeMap::from([(0, vec![0.2, 0.3, 0.5]), (1, vec![0.4, 0.4, 0.2])]);
        StagedTreeSpec::new(vertices, vec![], probs).unwrap()
    }

    #[test]
    fn unstaged_tree_has_one_block_per_vertex() {
        let c = compile_staged_tree(&two_stage()).unwrap();
        assert_eq!((c.model.n_atoms(), c.model.n_params()), (5, 6));
        assert_eq!(c.model.partition().n_blocks(), 2);
        let rows: Vec<Vec<usize>> =
            (0..5).map(|a| c.model.matrix().support(a).collect()).collect();
        assert_eq!(rows, vec![vec![0, 3], vec![0, 4], vec![0, 5], vec![1], vec![2]]);
        assert_eq!(c.aliases[3], "psi1");
        assert!(c.model.is_regular(Regularity::Weak).unwrap());
        assert!(!c.model.is_regular(Regularity::Strict).unwrap());
    }

    #[test]
    fn layout_uses_levels() {
        let c = compile_staged_tree(&two_stage()).unwrap();
        assert_eq!(c.layout.variables.len(), 2);
        assert_eq!(c.layout.atom_states[3], vec![Some(1), None]);
        assert_eq!(c.layout.atom_states[1], vec![Some(0), Some(1)]);
    }

    #[test]
    fn same_stage_on_path_is_rejected() {
        let vertices = vec![
            TreeVertex::new("r", vec![1, 2], &[]),
            TreeVertex::new("a", vec![3, 4], &[]),
            TreeVertex::leaf("l1"),
            TreeVertex::leaf("l2"),
            TreeVertex::leaf("l3"),
        ];
        let probs = BTreeMap::from([(0, vec![0.5, 0.5])]);
        let spec = StagedTreeSpec::new(vertices, vec![vec![0, 1]], probs).unwrap();
        assert!(matches!(
            compile_staged_tree(&spec),
            Err(CompileError::SameStageOnPath { .. })
        ));
    }

    #[test]
    fn structural_errors() {
        let probs = || BTreeMap::from([(0, vec![0.5, 0.5]), (1, vec![0.2, 0.3, 0.5])]);
        let mismatched = vec![
            TreeVertex::new("r", vec![1, 2], &[]),
            TreeVertex::new("a", vec![3, 4, 5], &[]),
            TreeVertex::new("b", vec![6, 7], &[]),
            TreeVertex::leaf("l1"),
            TreeVertex::leaf("l2"),
            TreeVertex::leaf("l3"),
            TreeVertex::leaf("l4"),
            TreeVertex::leaf("l5"),
        ];
        assert!(matches!(
            StagedTreeSpec::new(mismatched, vec![vec![1, 2]], probs()),
            Err(CompileError::StageOutDegree { .. })
        ));

        let single = vec![TreeVertex::new("r", vec![1], &[]), TreeVertex::leaf("l")];
        assert!(matches!(
            StagedTreeSpec::new(single, vec![], BTreeMap::new()),
            Err(CompileError::SingleChild(_))
        ));

        let forest = vec![
            TreeVertex::new("r", vec![1, 2], &[]),
            TreeVertex::leaf("l1"),
            TreeVertex::leaf("l2"),
            TreeVertex::leaf("stray"),
        ];
        assert!(matches!(
            StagedTreeSpec::new(forest, vec![], BTreeMap::from([(0, vec![0.5, 0.5])])),
            Err(CompileError::NotATree(_))
        ));

        let missing = vec![
            TreeVertex::new("r", vec![1, 2], &[]),
            TreeVertex::leaf("l1"),
            TreeVertex::leaf("l2"),
        ];
        assert!(matches!(
            StagedTreeSpec::new(missing, vec![], BTreeMap::new()),
            Err(CompileError::MissingStageProbabilities(_))
        ));
    }

    #[test]
    fn stage_members_share_parameters() {
        // r -> a, b; a and b share a stage
        let vertices = vec![
            TreeVertex::new("r", vec![1, 2], &[]),
            TreeVertex::new("a", vec![3, 4], &["x", "y"]),
            TreeVertex::new("b", vec![5, 6], &["x", "y"]),
            TreeVertex::leaf("l1"),
            TreeVertex::leaf("l2"),
            TreeVertex::leaf("l3"),
            TreeVertex::leaf("l4"),
        ];
        let probs = BTreeMap::from([(0, vec![0.5, 0.5]), (2, vec![0.1, 0.9])]);
        let spec = StagedTreeSpec::new(vertices, vec![vec![1, 2]], probs).unwrap();
        let c = compile_staged_tree(&spec).unwrap();
        assert_eq!(c.model.n_params(), 4);
        assert_eq!(c.model.matrix().support(0).collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(c.model.matrix().support(2).collect::<Vec<_>>(), vec![1, 2]);
        assert!(c.model.is_regular(Regularity::Strict).unwrap());
        assert_eq!(c.theta.values(), &[0.5, 0.5, 0.1, 0.9]);
    }
}
