use serde::{Deserialize, Serialize};

use super::{CompileError, Result, Variable};
use crate::model::AtomEvent;

/// Variable-level description of each atom.
///
/// `atom_states[a][i]` is the state of variable `i` in atom `a`, or `None`
/// when the variable is not determined on that atom (a staged-tree path that
/// ends before reaching level `i`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomLayout {
    pub variables: Vec<Variable>,
    pub atom_states: Vec<Vec<Option<usize>>>,
}

impl AtomLayout {
    pub fn new(variables: Vec<Variable>, atom_states: Vec<Vec<Option<usize>>>) -> Self {
        AtomLayout { variables, atom_states }
    }

    pub fn n_atoms(&self) -> usize {
        self.atom_states.len()
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }
}

/// Splits `"Y3=3,Y1=1"` into name/state pairs. Whitespace around tokens is
/// ignored; an empty string is the empty assignment.
pub fn parse_assignment(text: &str) -> Result<Vec<(String, String)>> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| match t.split_once('=') {
            Some((v, s)) if !v.trim().is_empty() && !s.trim().is_empty() => {
                Ok((v.trim().to_string(), s.trim().to_string()))
            }
            _ => Err(CompileError::UnknownVariable(t.to_string())),
        })
        .collect()
}

/// Atoms consistent with a partial assignment of variables to states.
///
/// The empty assignment selects every atom. Fails on unknown names, and
/// with an empty-event error when nothing matches.
pub fn atoms_matching(layout: &AtomLayout, assignment: &[(String, String)]) -> Result<AtomEvent> {
    let mut wanted = Vec::with_capacity(assignment.len());
    for (name, state) in assignment {
        let i = layout
            .variable_index(name)
            .ok_or_else(|| CompileError::UnknownVariable(name.clone()))?;
        let s = layout.variables[i].state_index(state).ok_or_else(|| CompileError::UnknownState {
            variable: name.clone(),
            state: state.clone(),
        })?;
        wanted.push((i, s));
    }
    let atoms = layout
        .atom_states
        .iter()
        .enumerate()
        .filter(|(_, states)| wanted.iter().all(|&(i, s)| states[i] == Some(s)))
        .map(|(a, _)| a)
        .collect();
    Ok(AtomEvent::new(atoms, layout.n_atoms())?)
}
