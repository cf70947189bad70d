use serde::{Deserialize, Serialize};

use super::{dedup_aliases, AtomLayout, CompileError, Compiled, Result};
use crate::model::{ExponentMatrix, MonomialModel, ParameterVector, SimplexPartition, SUM_TOLERANCE};

/// A discrete variable and its ordered state names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub states: Vec<String>,
}

impl Variable {
    pub fn new(name: impl Into<String>, states: &[&str]) -> Self {
        Variable { name: name.into(), states: states.iter().map(|s| s.to_string()).collect() }
    }

    /// States named `1..=n`.
    pub fn numbered(name: impl Into<String>, n: usize) -> Self {
        Variable { name: name.into(), states: (1..=n).map(|s| s.to_string()).collect() }
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, state: &str) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }
}

/// A Bayesian network with variables listed in a topological order.
///
/// `cpts[i][c]` is the distribution of variable `i` given its `c`-th parent
/// configuration; configurations enumerate with the last-listed parent
/// varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesNetSpec {
    variables: Vec<Variable>,
    parents: Vec<Vec<usize>>,
    cpts: Vec<Vec<Vec<f64>>>,
}

impl BayesNetSpec {
    pub fn new(
        variables: Vec<Variable>,
        parents: Vec<Vec<usize>>,
        cpts: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        for (i, v) in variables.iter().enumerate() {
            if v.n_states() < 2 {
                return Err(CompileError::TooFewStates(v.name.clone()));
            }
            if variables[..i].iter().any(|w| w.name == v.name) {
                return Err(CompileError::DuplicateVariable(v.name.clone()));
            }
        }
        if parents.len() != variables.len() || cpts.len() != variables.len() {
            return Err(CompileError::CptShape {
                variable: "*".into(),
                detail: format!(
                    "{} variables, {} parent lists, {} CPTs",
                    variables.len(),
                    parents.len(),
                    cpts.len()
                ),
            });
        }
        let spec = BayesNetSpec { variables, parents, cpts };
        for i in 0..spec.variables.len() {
            spec.check_variable(i)?;
        }
        Ok(spec)
    }

    fn check_variable(&self, i: usize) -> Result<()> {
        let var = &self.variables[i];
        for (n, &p) in self.parents[i].iter().enumerate() {
            if p >= i {
                let parent = self.variables.get(p).map(|v| v.name.clone()).unwrap_or(p.to_string());
                return Err(CompileError::ParentNotEarlier { child: var.name.clone(), parent });
            }
            if self.parents[i][..n].contains(&p) {
                return Err(CompileError::DuplicateParent {
                    child: var.name.clone(),
                    parent: self.variables[p].name.clone(),
                });
            }
        }
        let n_configs = self.n_configs(i);
        if self.cpts[i].len() != n_configs {
            return Err(CompileError::CptShape {
                variable: var.name.clone(),
                detail: format!(
                    "expected {n_configs} parent configurations, found {}",
                    self.cpts[i].len()
                ),
            });
        }
        for (c, column) in self.cpts[i].iter().enumerate() {
            let config = self.config_names(i, c).join(",");
            if column.len() != var.n_states() {
                return Err(CompileError::CptShape {
                    variable: var.name.clone(),
                    detail: format!(
                        "configuration [{config}] has {} entries for {} states",
                        column.len(),
                        var.n_states()
                    ),
                });
            }
            if let Some(&value) = column.iter().find(|&&p| !(p > 0.0)) {
                return Err(CompileError::NonPositiveProbability {
                    variable: var.name.clone(),
                    config,
                    value,
                });
            }
            let sum: f64 = column.iter().sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(CompileError::NonSimplexCpt { variable: var.name.clone(), config, sum });
            }
        }
        Ok(())
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn cpt(&self, i: usize) -> &[Vec<f64>] {
        &self.cpts[i]
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Number of parent configurations of variable `i`.
    pub fn n_configs(&self, i: usize) -> usize {
        self.parents[i].iter().map(|&p| self.variables[p].n_states()).product()
    }

    /// Index of the parent configuration selected by a full assignment.
    pub fn config_index(&self, i: usize, states: &[usize]) -> usize {
        self.parents[i]
            .iter()
            .fold(0, |acc, &p| acc * self.variables[p].n_states() + states[p])
    }

    /// Parent state indices of configuration `c`, in listed parent order.
    pub fn config_states(&self, i: usize, mut c: usize) -> Vec<usize> {
        let mut out = vec![0; self.parents[i].len()];
        for (slot, &p) in self.parents[i].iter().enumerate().rev() {
            let n = self.variables[p].n_states();
            out[slot] = c % n;
            c /= n;
        }
        out
    }

    fn config_names(&self, i: usize, c: usize) -> Vec<String> {
        self.config_states(i, c)
            .into_iter()
            .zip(&self.parents[i])
            .map(|(s, &p)| self.variables[p].states[s].clone())
            .collect()
    }
}

/// Compiles a Bayesian network into a multilinear, regular monomial model.
///
/// Atoms enumerate the joint state space with the last variable varying
/// fastest. Blocks are ordered by variable, then parent configuration.
pub fn compile_bn(spec: &BayesNetSpec) -> Result<Compiled> {
    let vars = spec.variables();
    let m = vars.len();

    let mut block_offsets = Vec::with_capacity(m);
    let mut blocks = Vec::new();
    let mut block_variables = Vec::new();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut aliases = Vec::new();
    let compact = vars.iter().all(|v| v.n_states() <= 9);

    for (i, var) in vars.iter().enumerate() {
        let mut offsets = Vec::with_capacity(spec.n_configs(i));
        for c in 0..spec.n_configs(i) {
            let start = values.len();
            offsets.push(start);
            blocks.push((start..start + var.n_states()).collect::<Vec<_>>());
            block_variables.push(i);
            let config_states = spec.config_states(i, c);
            let condition = config_states
                .iter()
                .zip(spec.parents(i))
                .map(|(&s, &p)| format!("{}={}", vars[p].name, vars[p].states[s]))
                .collect::<Vec<_>>()
                .join(",");
            for (s, state) in var.states.iter().enumerate() {
                values.push(spec.cpt(i)[c][s]);
                labels.push(if condition.is_empty() {
                    format!("P({}={state})", var.name)
                } else {
                    format!("P({}={state}|{condition})", var.name)
                });
                let digits: Vec<String> = std::iter::once(s)
                    .chain(config_states.iter().copied())
                    .map(|d| (d + 1).to_string())
                    .collect();
                aliases.push(if compact {
                    format!("theta{}", digits.concat())
                } else {
                    format!("theta{}", digits.join("_"))
                });
            }
        }
        block_offsets.push(offsets);
    }

    let n_atoms: usize = vars.iter().map(Variable::n_states).product();
    let mut supports = Vec::with_capacity(n_atoms);
    let mut atom_states = Vec::with_capacity(n_atoms);
    let mut atom_labels = Vec::with_capacity(n_atoms);
    let mut states = vec![0usize; m];
    for _ in 0..n_atoms {
        let row: Vec<usize> = (0..m)
            .map(|i| block_offsets[i][spec.config_index(i, &states)] + states[i])
            .collect();
        supports.push(row);
        atom_states.push(states.iter().map(|&s| Some(s)).collect());
        atom_labels.push(
            states
                .iter()
                .zip(vars)
                .map(|(&s, v)| format!("{}={}", v.name, v.states[s]))
                .collect::<Vec<_>>()
                .join(","),
        );
        // odometer, last variable fastest
        for i in (0..m).rev() {
            states[i] += 1;
            if states[i] < vars[i].n_states() {
                break;
            }
            states[i] = 0;
        }
    }

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
        layout: AtomLayout::new(vars.to_vec(), atom_states),
        block_variables: Some(block_variables),
    })
}
