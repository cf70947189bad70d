use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Result, SensitivityError};
use crate::model::{ModelError, MonomialModel};

/// A block touched by the varied set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TouchedBlock {
    pub block: usize,
    /// `V_i`, ascending.
    pub varied: Vec<usize>,
    /// `S_i \ V_i`, ascending.
    pub free: Vec<usize>,
    /// A single free parameter is pinned by the sum-to-one constraint.
    pub forced: bool,
}

/// Split of the parameter indices into varied, covaried and fixed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexGeometry {
    /// `V`, ascending.
    pub varied: Vec<usize>,
    /// `C`, the union of touched blocks, ascending.
    pub covaried: Vec<usize>,
    /// `F = [k] \ C`, ascending.
    pub fixed: Vec<usize>,
    pub blocks: Vec<TouchedBlock>,
}

impl IndexGeometry {
    /// Number of free coordinates of `L_sensi`.
    pub fn free_dimensions(&self) -> usize {
        self.blocks.iter().map(|b| b.free.len() - 1).sum()
    }

    pub fn in_c(&self, j: usize) -> bool {
        self.covaried.binary_search(&j).is_ok()
    }

    pub fn in_v(&self, j: usize) -> bool {
        self.varied.binary_search(&j).is_ok()
    }

    /// Position of `block` in [`IndexGeometry::blocks`].
    pub fn touched_position(&self, block: usize) -> Option<usize> {
        self.blocks.iter().position(|b| b.block == block)
    }
}

/// Computes `C`, `F` and the per-block `V_i` for the varied indices.
pub fn index_geometry(model: &MonomialModel, varied: &[usize]) -> Result<IndexGeometry> {
    if varied.is_empty() {
        return Err(SensitivityError::EmptyVariation);
    }
    let k = model.n_params();
    let mut v = varied.to_vec();
    v.sort_unstable();
    for w in v.windows(2) {
        if w[0] == w[1] {
            return Err(SensitivityError::DuplicateParameter(w[0]));
        }
    }
    if let Some(&j) = v.iter().find(|&&j| j >= k) {
        return Err(SensitivityError::UnknownParameter(j));
    }
    let partition = model.partition();
    let mut touched: Vec<usize> = v.iter().map(|&j| partition.block_of(j)).collect();
    touched.sort_unstable();
    touched.dedup();

    let mut blocks = Vec::with_capacity(touched.len());
    let mut covaried = Vec::new();
    for &b in &touched {
        let mut members = partition.block(b).to_vec();
        members.sort_unstable();
        let (bv, free): (Vec<usize>, Vec<usize>) =
            members.iter().partition(|j| v.binary_search(j).is_ok());
        if free.is_empty() {
            return Err(SensitivityError::WholeBlockVaried(b));
        }
        covaried.extend_from_slice(&members);
        blocks.push(TouchedBlock { block: b, varied: bv, forced: free.len() == 1, free });
    }
    covaried.sort_unstable();
    let fixed = (0..k).filter(|j| covaried.binary_search(j).is_err()).collect();
    Ok(IndexGeometry { varied: v, covaried, fixed, blocks })
}

/// One non-empty `H` and its atom set `Y_H`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HSet {
    /// Columns of `C` carried by the atoms, ascending.
    pub params: Vec<usize>,
    pub atoms: Vec<usize>,
}

/// The non-empty `Y_H`, in order of first atom.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HSupport {
    pub sets: Vec<HSet>,
    /// Atoms carrying no parameter of `C`.
    pub untouched_atoms: Vec<usize>,
}

/// Groups atoms by the set of `C` columns in their row.
pub fn h_support(model: &MonomialModel, geometry: &IndexGeometry) -> Result<HSupport> {
    if !model.is_multilinear() {
        return Err(ModelError::NotMultilinear.into());
    }
    let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut sets: Vec<HSet> = Vec::new();
    let mut untouched_atoms = Vec::new();
    for atom in 0..model.n_atoms() {
        let h: Vec<usize> = model.matrix().support(atom).filter(|&j| geometry.in_c(j)).collect();
        if h.is_empty() {
            untouched_atoms.push(atom);
            continue;
        }
        match index.get(&h) {
            Some(&i) => sets[i].atoms.push(atom),
            None => {
                index.insert(h.clone(), sets.len());
                sets.push(HSet { params: h, atoms: vec![atom] });
            }
        }
    }
    Ok(HSupport { sets, untouched_atoms })
}
