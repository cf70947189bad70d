//! Monomial models: a sparse exponent matrix over a partition of the
//! parameters into simplex blocks.
//!
//! Every atom `y` of a finite sample space gets the probability
//! `P(y) = prod_j theta_j^{A[y, j]}`. Parameters are grouped into blocks
//! whose entries sum to one. Indices are 0-based everywhere in the API;
//! human-facing `Display` impls report them 1-based.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on per-block sums and on total probability.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Parameters must lie in `(POSITIVITY_MARGIN, 1 - POSITIVITY_MARGIN)`.
pub const POSITIVITY_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("atom index {index} out of range for a model with {n_atoms} atoms")]
    AtomOutOfRange { index: usize, n_atoms: usize },
    #[error("parameter index {index} out of range for a model with {n_params} parameters")]
    ParamOutOfRange { index: usize, n_params: usize },
    #[error("row {} of the exponent matrix is all zeros", .row + 1)]
    EmptyRow { row: usize },
    #[error("row {} of the exponent matrix has every exponent equal to one", .row + 1)]
    SaturatedRow { row: usize },
    #[error("zero exponent stored at row {}, column {}; zeros are implicit", .row + 1, .col + 1)]
    ZeroExponent { row: usize, col: usize },
    #[error("duplicate exponent entry at row {}, column {}", .row + 1, .col + 1)]
    DuplicateEntry { row: usize, col: usize },
    #[error("partition block {} has {size} element(s); at least 2 are required", .block + 1)]
    BlockTooSmall { block: usize, size: usize },
    #[error("parameter {} appears in more than one partition block", .index + 1)]
    OverlappingBlocks { index: usize },
    #[error("parameter {} is not covered by the partition", .index + 1)]
    UncoveredParam { index: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid parameter vector: {0}")]
    InvalidTheta(String),
    #[error("model is not multilinear")]
    NotMultilinear,
    #[error("an event must contain at least one atom")]
    EmptyEvent,
    #[error("atom {} listed twice in event", .0 + 1)]
    DuplicateAtom(usize),
}

impl ModelError {
    /// Stable identifier of the error case, used on the wire.
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::AtomOutOfRange { .. } => "AtomOutOfRange",
            ModelError::ParamOutOfRange { .. } => "ParamOutOfRange",
            ModelError::EmptyRow { .. } => "EmptyRow",
            ModelError::SaturatedRow { .. } => "SaturatedRow",
            ModelError::ZeroExponent { .. } => "ZeroExponent",
            ModelError::DuplicateEntry { .. } => "DuplicateEntry",
            ModelError::BlockTooSmall { .. } => "BlockTooSmall",
            ModelError::OverlappingBlocks { .. } => "OverlappingBlocks",
            ModelError::UncoveredParam { .. } => "UncoveredParam",
            ModelError::ShapeMismatch(_) => "ShapeMismatch",
            ModelError::InvalidTheta(_) => "InvalidTheta",
            ModelError::NotMultilinear => "NotMultilinear",
            ModelError::EmptyEvent => "EmptyEvent",
            ModelError::DuplicateAtom(_) => "DuplicateAtom",
        }
    }
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Sparse `q x k` matrix of non-negative integer exponents.
///
/// Each row is kept sorted by column and stores only non-zero entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentMatrix {
    n_params: usize,
    rows: Vec<Vec<(usize, u32)>>,
}

impl ExponentMatrix {
    /// Builds the matrix from `(row, col, exponent)` triples.
    pub fn from_triples<I>(n_atoms: usize, n_params: usize, triples: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, u32)>,
    {
        let mut rows: Vec<Vec<(usize, u32)>> = vec![Vec::new(); n_atoms];
        for (row, col, exp) in triples {
            if row >= n_atoms {
                return Err(ModelError::AtomOutOfRange { index: row, n_atoms });
            }
            if col >= n_params {
                return Err(ModelError::ParamOutOfRange { index: col, n_params });
            }
            if exp == 0 {
                return Err(ModelError::ZeroExponent { row, col });
            }
            rows[row].push((col, exp));
        }
        for (row, entries) in rows.iter_mut().enumerate() {
            entries.sort_unstable_by_key(|&(c, _)| c);
            if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(ModelError::DuplicateEntry { row, col: w[0].0 });
            }
        }
        let matrix = ExponentMatrix { n_params, rows };
        matrix.check_rows()?;
        Ok(matrix)
    }

    /// Builds a multilinear matrix from the list of columns carrying a one in
    /// each row.
    pub fn from_supports(n_params: usize, supports: Vec<Vec<usize>>) -> Result<Self> {
        let n_atoms = supports.len();
        let triples = supports
            .into_iter()
            .enumerate()
            .flat_map(|(row, cols)| cols.into_iter().map(move |c| (row, c, 1)));
        Self::from_triples(n_atoms, n_params, triples)
    }

    fn check_rows(&self) -> Result<()> {
        for (row, entries) in self.rows.iter().enumerate() {
            if entries.is_empty() {
                return Err(ModelError::EmptyRow { row });
            }
            if entries.len() == self.n_params && entries.iter().all(|&(_, e)| e == 1) {
                return Err(ModelError::SaturatedRow { row });
            }
        }
        Ok(())
    }

    pub fn n_atoms(&self) -> usize {
        self.rows.len()
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    /// Non-zero `(column, exponent)` entries of one row, sorted by column.
    pub fn row(&self, atom: usize) -> &[(usize, u32)] {
        &self.rows[atom]
    }

    pub fn exponent(&self, atom: usize, param: usize) -> u32 {
        self.rows[atom]
            .binary_search_by_key(&param, |&(c, _)| c)
            .map(|i| self.rows[atom][i].1)
            .unwrap_or(0)
    }

    /// Columns with a non-zero exponent in `atom`.
    pub fn support(&self, atom: usize) -> impl Iterator<Item = usize> + '_ {
        self.rows[atom].iter().map(|&(c, _)| c)
    }

    pub fn triples(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(r, entries)| entries.iter().map(move |&(c, e)| (r, c, e)))
    }

    pub fn is_multilinear(&self) -> bool {
        self.rows.iter().flatten().all(|&(_, e)| e == 1)
    }
}

/// Ordered partition of `[k]` into simplex blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPartition {
    blocks: Vec<Vec<usize>>,
    block_of: Vec<usize>,
}

impl SimplexPartition {
    pub fn new(n_params: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut block_of = vec![usize::MAX; n_params];
        for (b, block) in blocks.iter().enumerate() {
            if block.len() < 2 {
                return Err(ModelError::BlockTooSmall { block: b, size: block.len() });
            }
            for &j in block {
                if j >= n_params {
                    return Err(ModelError::ParamOutOfRange { index: j, n_params });
                }
                if block_of[j] != usize::MAX {
                    return Err(ModelError::OverlappingBlocks { index: j });
                }
                block_of[j] = b;
            }
        }
        if let Some(j) = block_of.iter().position(|&b| b == usize::MAX) {
            return Err(ModelError::UncoveredParam { index: j });
        }
        Ok(SimplexPartition { blocks, block_of })
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn n_params(&self) -> usize {
        self.block_of.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block(&self, b: usize) -> &[usize] {
        &self.blocks[b]
    }

    /// Index of the block containing parameter `j`.
    pub fn block_of(&self, j: usize) -> usize {
        self.block_of[j]
    }
}

/// Parameter values with human-readable labels.
///
/// Construction only checks shape; simplex membership is checked against a
/// partition with [`ParameterVector::violations`] or
/// [`ParameterVector::check`], so invalid vectors can still be inspected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    values: Vec<f64>,
    labels: Vec<String>,
}

impl ParameterVector {
    pub fn new(values: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        if values.len() != labels.len() {
            return Err(ModelError::ShapeMismatch(format!(
                "{} parameter values but {} labels",
                values.len(),
                labels.len()
            )));
        }
        Ok(ParameterVector { values, labels })
    }

    /// Values with generated labels `theta1..thetak`.
    pub fn unlabeled(values: Vec<f64>) -> Self {
        let labels = (1..=values.len()).map(|i| format!("theta{i}")).collect();
        ParameterVector { values, labels }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same labels, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        ParameterVector::new(values, self.labels.clone())
    }

    /// Simplex and positivity violations with respect to `partition`.
    pub fn violations(&self, partition: &SimplexPartition) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.values.len() != partition.n_params() {
            out.push(Violation::LengthMismatch {
                expected: partition.n_params(),
                found: self.values.len(),
            });
            return out;
        }
        for (j, &v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                out.push(Violation::NonFinite { param: j });
            } else if v <= POSITIVITY_MARGIN {
                out.push(Violation::NonPositive { param: j, value: v });
            } else if v >= 1.0 - POSITIVITY_MARGIN {
                out.push(Violation::NotBelowOne { param: j, value: v });
            }
        }
        for (b, block) in partition.blocks().iter().enumerate() {
            let sum: f64 = block.iter().map(|&j| self.values[j]).sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE || !sum.is_finite() {
                out.push(Violation::BlockSum { block: b, sum });
            }
        }
        out
    }

    pub fn check(&self, partition: &SimplexPartition) -> Result<()> {
        match self.violations(partition).first() {
            None => Ok(()),
            Some(v) => Err(ModelError::InvalidTheta(v.to_string())),
        }
    }
}

/// One problem found by [`MonomialModel::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    LengthMismatch { expected: usize, found: usize },
    NonFinite { param: usize },
    NonPositive { param: usize, value: f64 },
    NotBelowOne { param: usize, value: f64 },
    BlockSum { block: usize, sum: f64 },
    TotalProbability { total: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LengthMismatch { expected, found } => {
                write!(f, "expected {expected} parameters, found {found}")
            }
            Violation::NonFinite { param } => write!(f, "parameter {} is not finite", param + 1),
            Violation::NonPositive { param, value } => {
                write!(f, "parameter {} = {value} is not strictly positive", param + 1)
            }
            Violation::NotBelowOne { param, value } => {
                write!(f, "parameter {} = {value} is not strictly below one", param + 1)
            }
            Violation::BlockSum { block, sum } => {
                write!(f, "block {} sums to {sum} instead of 1", block + 1)
            }
            Violation::TotalProbability { total } => {
                write!(f, "atomic probabilities sum to {total} instead of 1")
            }
        }
    }
}

/// Result of [`MonomialModel::validate`]; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Which reading of regularity to check, see [`MonomialModel::is_regular`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularity {
    Strict,
    Weak,
}

/// A non-empty set of atoms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomEvent {
    atoms: Vec<usize>,
}

impl AtomEvent {
    pub fn new(atoms: Vec<usize>, n_atoms: usize) -> Result<Self> {
        if atoms.is_empty() {
            return Err(ModelError::EmptyEvent);
        }
        let mut seen = BTreeSet::new();
        for &a in &atoms {
            if a >= n_atoms {
                return Err(ModelError::AtomOutOfRange { index: a, n_atoms });
            }
            if !seen.insert(a) {
                return Err(ModelError::DuplicateAtom(a));
            }
        }
        Ok(AtomEvent { atoms: seen.into_iter().collect() })
    }

    pub fn all(n_atoms: usize) -> Self {
        AtomEvent { atoms: (0..n_atoms).collect() }
    }

    /// Sorted atom indices.
    pub fn atoms(&self) -> &[usize] {
        &self.atoms
    }
}

/// An exponent matrix together with its simplex partition.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialModel {
    matrix: ExponentMatrix,
    partition: SimplexPartition,
    atom_labels: Vec<String>,
}

impl MonomialModel {
    pub fn new(
        matrix: ExponentMatrix,
        partition: SimplexPartition,
        atom_labels: Vec<String>,
    ) -> Result<Self> {
        if matrix.n_params() != partition.n_params() {
            return Err(ModelError::ShapeMismatch(format!(
                "matrix has {} columns but the partition covers {} parameters",
                matrix.n_params(),
                partition.n_params()
            )));
        }
        if atom_labels.len() != matrix.n_atoms() {
            return Err(ModelError::ShapeMismatch(format!(
                "matrix has {} rows but {} atom labels were given",
                matrix.n_atoms(),
                atom_labels.len()
            )));
        }
        Ok(MonomialModel { matrix, partition, atom_labels })
    }

    pub fn matrix(&self) -> &ExponentMatrix {
        &self.matrix
    }

    pub fn partition(&self) -> &SimplexPartition {
        &self.partition
    }

    pub fn atom_labels(&self) -> &[String] {
        &self.atom_labels
    }

    pub fn n_atoms(&self) -> usize {
        self.matrix.n_atoms()
    }

    pub fn n_params(&self) -> usize {
        self.matrix.n_params()
    }

    fn checked_theta<'a>(&self, theta: &'a ParameterVector) -> Result<&'a [f64]> {
        theta.check(&self.partition)?;
        Ok(theta.values())
    }

    /// `theta^{A_y}` for a single atom.
    pub fn atomic_probability(&self, theta: &ParameterVector, atom: usize) -> Result<f64> {
        if atom >= self.n_atoms() {
            return Err(ModelError::AtomOutOfRange { index: atom, n_atoms: self.n_atoms() });
        }
        let values = self.checked_theta(theta)?;
        Ok(self.monomial(values, atom))
    }

    /// Sum of atomic probabilities over the event.
    pub fn event_probability(&self, theta: &ParameterVector, event: &AtomEvent) -> Result<f64> {
        if let Some(&a) = event.atoms().iter().find(|&&a| a >= self.n_atoms()) {
            return Err(ModelError::AtomOutOfRange { index: a, n_atoms: self.n_atoms() });
        }
        let values = self.checked_theta(theta)?;
        Ok(event.atoms().iter().map(|&a| self.monomial(values, a)).sum())
    }

    /// All atomic probabilities, in atom order.
    pub fn distribution(&self, theta: &ParameterVector) -> Result<Vec<f64>> {
        let values = self.checked_theta(theta)?;
        Ok(self.distribution_unchecked(values))
    }

    /// Atomic probabilities for raw values; the caller guarantees validity.
    pub fn distribution_unchecked(&self, values: &[f64]) -> Vec<f64> {
        (0..self.n_atoms()).map(|a| self.monomial(values, a)).collect()
    }

    pub(crate) fn monomial(&self, values: &[f64], atom: usize) -> f64 {
        self.matrix
            .row(atom)
            .iter()
            .map(|&(c, e)| if e == 1 { values[c] } else { values[c].powi(e as i32) })
            .product()
    }

    pub fn is_multilinear(&self) -> bool {
        self.matrix.is_multilinear()
    }

    /// Regularity of a multilinear model.
    ///
    /// Weak: no row carries more than one parameter of any block.
    /// Strict: weak, and every row carries a parameter from the same number
    /// of blocks, so each atom picks exactly one parameter per block along
    /// its context. Bayesian networks and uniform-depth staged trees are
    /// strictly regular; trees with leaves at different stage depths are
    /// only weakly regular.
    pub fn is_regular(&self, mode: Regularity) -> Result<bool> {
        if !self.is_multilinear() {
            return Err(ModelError::NotMultilinear);
        }
        let mut depth = None;
        for atom in 0..self.n_atoms() {
            let mut blocks: Vec<usize> =
                self.matrix.support(atom).map(|c| self.partition.block_of(c)).collect();
            let touched = blocks.len();
            blocks.sort_unstable();
            blocks.dedup();
            if blocks.len() != touched {
                return Ok(false);
            }
            if mode == Regularity::Strict {
                match depth {
                    None => depth = Some(touched),
                    Some(d) if d != touched => return Ok(false),
                    Some(_) => {}
                }
            }
        }
        Ok(true)
    }

    /// Reports every violation instead of failing on the first.
    pub fn validate(&self, theta: &ParameterVector) -> ValidationReport {
        let mut violations = theta.violations(&self.partition);
        if violations.is_empty() {
            let total: f64 = self.distribution_unchecked(theta.values()).iter().sum();
            if (total - 1.0).abs() > SUM_TOLERANCE {
                violations.push(Violation::TotalProbability { total });
            }
        }
        ValidationReport { violations }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn saturated(values: &[f64]) -> (MonomialModel, ParameterVector) {
        let k = values.len();
        let matrix = ExponentMatrix::from_supports(k, (0..k).map(|j| vec![j]).collect()).unwrap();
        let partition = SimplexPartition::new(k, vec![(0..k).collect()]).unwrap();
        let labels = (0..k).map(|j| format!("y{}", j + 1)).collect();
        let model = MonomialModel::new(matrix, partition, labels).unwrap();
        (model, ParameterVector::unlabeled(values.to_vec()))
    }

    /// The staged tree with atoms theta1*psi_j, theta2, theta3.
    fn two_stage_tree() -> (MonomialModel, ParameterVector) {
        let supports = vec![vec![0, 3], vec![0, 4], vec![0, 5], vec![1], vec![2]];
        let matrix = ExponentMatrix::from_supports(6, supports).unwrap();
        let partition = SimplexPartition::new(6, vec![vec![0, 1, 2], vec![3, 4, 5]]).unwrap();
        let labels = (1..=5).map(|i| format!("y{i}")).collect();
        let model = MonomialModel::new(matrix, partition, labels).unwrap();
        (model, ParameterVector::unlabeled(vec![0.2, 0.5, 0.3, 0.4, 0.4, 0.2]))
    }

    #[test]
    fn single_factor_monomial() {
        let (model, theta) = saturated(&[0.3, 0.7]);
        assert_eq!(model.atomic_probability(&theta, 0).unwrap(), 0.3);
    }

    #[test]
    fn tree_atom_and_event() {
        let (model, theta) = two_stage_tree();
        let p = model.atomic_probability(&theta, 1).unwrap();
        assert!((p - 0.08).abs() < 1e-15);
        let event = AtomEvent::new(vec![3, 4], 5).unwrap();
        assert!((model.event_probability(&theta, &event).unwrap() - 0.8).abs() < 1e-15);
        let total = model.event_probability(&theta, &AtomEvent::all(5)).unwrap();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_atom() {
        let (model, theta) = saturated(&[0.3, 0.7]);
        assert!(matches!(
            model.atomic_probability(&theta, 2),
            Err(ModelError::AtomOutOfRange { index: 2, n_atoms: 2 })
        ));
    }

    #[test]
    fn invalid_theta_is_rejected_by_evaluation() {
        let (model, _) = saturated(&[0.3, 0.7]);
        let bad = ParameterVector::unlabeled(vec![0.3, 0.6]);
        assert!(matches!(model.atomic_probability(&bad, 0), Err(ModelError::InvalidTheta(_))));
    }

    #[test]
    fn multilinearity() {
        let (model, _) = two_stage_tree();
        assert!(model.is_multilinear());
        let squared =
            ExponentMatrix::from_triples(2, 2, vec![(0, 0, 2), (1, 1, 1)]).unwrap();
        assert!(!squared.is_multilinear());
        let partition = SimplexPartition::new(2, vec![vec![0, 1]]).unwrap();
        let m = MonomialModel::new(squared, partition, vec!["a".into(), "b".into()]).unwrap();
        assert!(!m.is_multilinear());
        assert_eq!(m.is_regular(Regularity::Weak), Err(ModelError::NotMultilinear));
    }

    #[test]
    fn regularity_readings() {
        let (model, _) = two_stage_tree();
        assert!(model.is_regular(Regularity::Weak).unwrap());
        assert!(!model.is_regular(Regularity::Strict).unwrap());

        // two ones inside one block
        let matrix =
            ExponentMatrix::from_supports(4, vec![vec![0, 1], vec![2], vec![3]]).unwrap();
        let partition = SimplexPartition::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        let labels = vec!["a".into(), "b".into(), "c".into()];
        let m = MonomialModel::new(matrix, partition, labels).unwrap();
        assert!(!m.is_regular(Regularity::Weak).unwrap());
        assert!(!m.is_regular(Regularity::Strict).unwrap());
    }

    #[test]
    fn validate_reports_instead_of_failing() {
        let (model, theta) = two_stage_tree();
        assert!(model.validate(&theta).is_valid());

        let short = theta.with_values(vec![0.2, 0.4, 0.3, 0.4, 0.4, 0.2]).unwrap();
        let report = model.validate(&short);
        assert_eq!(report.violations.len(), 1);
        assert!(matches!(report.violations[0], Violation::BlockSum { block: 0, .. }));

        let zero = theta.with_values(vec![0.0, 0.7, 0.3, 0.4, 0.4, 0.2]).unwrap();
        let report = model.validate(&zero);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::NonPositive { param: 0, .. })));
    }

    #[test]
    fn total_probability_violation_for_irregular_model() {
        // theta2 * theta3 in one row with both parameters in the same block
        let matrix =
            ExponentMatrix::from_supports(3, vec![vec![0], vec![1], vec![2], vec![1, 2]]).unwrap();
        let partition = SimplexPartition::new(3, vec![vec![0, 1, 2]]).unwrap();
        let labels = (1..=4).map(|i| i.to_string()).collect();
        let model = MonomialModel::new(matrix, partition, labels).unwrap();
        let theta = ParameterVector::unlabeled(vec![0.2, 0.3, 0.5]);
        let report = model.validate(&theta);
        assert!(matches!(report.violations[..], [Violation::TotalProbability { .. }]));
    }

    #[test]
    fn matrix_invariants() {
        assert!(matches!(
            ExponentMatrix::from_supports(2, vec![vec![0], vec![]]),
            Err(ModelError::EmptyRow { row: 1 })
        ));
        assert!(matches!(
            ExponentMatrix::from_supports(2, vec![vec![0, 1]]),
            Err(ModelError::SaturatedRow { row: 0 })
        ));
        assert!(matches!(
            ExponentMatrix::from_triples(1, 2, vec![(0, 0, 0)]),
            Err(ModelError::ZeroExponent { .. })
        ));
        assert!(matches!(
            ExponentMatrix::from_triples(1, 3, vec![(0, 1, 1), (0, 1, 1)]),
            Err(ModelError::DuplicateEntry { .. })
        ));
    }

    #[test]
    fn partition_invariants() {
        assert!(matches!(
            SimplexPartition::new(3, vec![vec![0, 1], vec![2]]),
            Err(ModelError::BlockTooSmall { block: 1, size: 1 })
        ));
        assert!(matches!(
            SimplexPartition::new(3, vec![vec![0, 1], vec![1, 2]]),
            Err(ModelError::OverlappingBlocks { index: 1 })
        ));
        assert!(matches!(
            SimplexPartition::new(4, vec![vec![0, 1], vec![2, 0]]),
            Err(ModelError::OverlappingBlocks { index: 0 })
        ));
        assert!(matches!(
            SimplexPartition::new(5, vec![vec![0, 1], vec![2, 3]]),
            Err(ModelError::UncoveredParam { index: 4 })
        ));
    }

    #[test]
    fn event_invariants() {
        assert_eq!(AtomEvent::new(vec![], 3), Err(ModelError::EmptyEvent));
        assert_eq!(AtomEvent::new(vec![1, 1], 3), Err(ModelError::DuplicateAtom(1)));
        assert!(AtomEvent::new(vec![3], 3).is_err());
        assert_eq!(AtomEvent::new(vec![2, 0], 3).unwrap().atoms(), &[0, 2]);
    }
}
