use std::collections::{BTreeMap, HashSet};

use itertools::Itertools;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::geometry::{h_support, index_geometry, HSupport, IndexGeometry};
use super::residual::{dirichlet_ones, evaluate, proportional_point, sample_l_sensi};
use super::{Result, SensitivityError};
use crate::model::{ModelError, MonomialModel, Regularity};

/// Orderings are searched exhaustively up to this many linked blocks.
const MAX_ORDERED_BLOCKS: usize = 6;
const CERTIFY_SEED: u64 = 0x0005_eed0_fa11;
const CERTIFY_THETAS: usize = 4;
const CERTIFY_SAMPLES: usize = 4;
const CERTIFY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisKind {
    Independent,
    FullyDependent,
    ConditionallyDependent,
    Other,
}

impl AnalysisKind {
    pub fn name(self) -> &'static str {
        match self {
            AnalysisKind::Independent => "independent",
            AnalysisKind::FullyDependent => "fully_dependent",
            AnalysisKind::ConditionallyDependent => "conditionally_dependent",
            AnalysisKind::Other => "other",
        }
    }
}

/// Verdict for one group of touched blocks linked through shared rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComponentKind {
    /// A block sharing no row with any other touched block.
    Single,
    /// Every combination of one parameter per block divides some row.
    FullyDependent,
    /// The ordered family holds for the given block order.
    ConditionallyDependent { order: Vec<usize> },
    /// No ordering satisfies the ordered family.
    NotCovered,
    /// Too many linked blocks to search all orderings.
    NotDisproven,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentVerdict {
    pub blocks: Vec<usize>,
    #[serde(flatten)]
    pub kind: ComponentKind,
}

/// Classification of a varied set, with the evidence behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisClass {
    pub kind: AnalysisKind,
    /// Verdict of the divisibility patterns alone.
    pub pattern: AnalysisKind,
    pub components: Vec<ComponentVerdict>,
    /// The `H` sets with non-empty `Y_H`.
    pub h_sets: Vec<Vec<usize>>,
    /// Whether the Pythagorean identity held for every generic trial point.
    pub identity_certified: bool,
    /// Largest `|D(Q||P) - D(Q||P~) - D(P~||P)|` seen while certifying.
    pub certification_gap: f64,
    pub notes: Vec<String>,
}

/// Classifies the analysis varying `varied`, from the exponent matrix and
/// partition alone.
///
/// Touched blocks that share a row are linked. If no two are linked the
/// analysis is independent. Each linked group must be fully dependent, or
/// satisfy the ordered family for some block order. The pattern verdict is
/// then checked against the Pythagorean identity on seeded random parameter
/// values; a pattern that fails the check is reported as `other`.
pub fn classify_analysis(model: &MonomialModel, varied: &[usize]) -> Result<AnalysisClass> {
    if !model.is_regular(Regularity::Weak)? {
        return Err(SensitivityError::NotRegular);
    }
    let geometry = index_geometry(model, varied)?;
    let support = h_support(model, &geometry)?;
    let partition = model.partition();

    let touched: Vec<usize> = geometry.blocks.iter().map(|b| b.block).collect();
    let mut parent: Vec<usize> = (0..touched.len()).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        parent[i] = r;
        r
    }
    for set in &support.sets {
        let positions: Vec<usize> = set
            .params
            .iter()
            .filter_map(|&j| geometry.touched_position(partition.block_of(j)))
            .collect();
        for w in positions.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..touched.len() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(touched[i]);
    }

    let rows = restricted_rows(model, &geometry);
    let mut components = Vec::with_capacity(groups.len());
    let mut notes = Vec::new();
    for blocks in groups.into_values() {
        let kind = if blocks.len() == 1 {
            ComponentKind::Single
        } else if fully_dependent(model, &rows, &blocks) {
            ComponentKind::FullyDependent
        } else if blocks.len() > MAX_ORDERED_BLOCKS {
            notes.push(format!(
                "{} linked blocks exceed the ordering search limit of {MAX_ORDERED_BLOCKS}; not disproven",
                blocks.len()
            ));
            ComponentKind::NotDisproven
        } else {
            match blocks
                .iter()
                .copied()
                .permutations(blocks.len())
                .find(|order| ordered_family_holds(&geometry, &rows, order))
            {
                Some(order) => ComponentKind::ConditionallyDependent { order },
                None => ComponentKind::NotCovered,
            }
        };
        components.push(ComponentVerdict { blocks, kind });
    }

    let pattern = if components.iter().all(|c| c.kind == ComponentKind::Single) {
        AnalysisKind::Independent
    } else if components
        .iter()
        .all(|c| matches!(c.kind, ComponentKind::Single | ComponentKind::FullyDependent))
    {
        AnalysisKind::FullyDependent
    } else if components.iter().all(|c| {
        matches!(
            c.kind,
            ComponentKind::Single
                | ComponentKind::FullyDependent
                | ComponentKind::ConditionallyDependent { .. }
        )
    }) {
        AnalysisKind::ConditionallyDependent
    } else {
        AnalysisKind::Other
    };

    let certification_gap = certify(model, &geometry, &support)?;
    let identity_certified = certification_gap < CERTIFY_TOLERANCE;
    let kind = if pattern != AnalysisKind::Other && !identity_certified {
        notes.push(format!(
            "divisibility pattern is {} but the Pythagorean identity fails for generic parameters (gap {certification_gap:.3e}); reported as other",
            pattern.name()
        ));
        AnalysisKind::Other
    } else {
        if pattern == AnalysisKind::Other && identity_certified {
            notes.push(
                "the Pythagorean identity holds for generic parameters although no pattern matches".into(),
            );
        }
        pattern
    };

    Ok(AnalysisClass {
        kind,
        pattern,
        components,
        h_sets: support.sets.iter().map(|s| s.params.clone()).collect(),
        identity_certified,
        certification_gap,
        notes,
    })
}

/// Each row's `C` columns keyed by block.
fn restricted_rows(model: &MonomialModel, geometry: &IndexGeometry) -> Vec<BTreeMap<usize, usize>> {
    let partition = model.partition();
    (0..model.n_atoms())
        .map(|y| {
            model
                .matrix()
                .support(y)
                .filter(|&j| geometry.in_c(j))
                .map(|j| (partition.block_of(j), j))
                .collect()
        })
        .collect()
}

/// Distinct projections onto `blocks` of the rows touching all of them.
fn projections(rows: &[BTreeMap<usize, usize>], blocks: &[usize]) -> HashSet<Vec<usize>> {
    rows.iter()
        .filter_map(|row| blocks.iter().map(|b| row.get(b).copied()).collect::<Option<Vec<_>>>())
        .collect()
}

fn fully_dependent(
    model: &MonomialModel,
    rows: &[BTreeMap<usize, usize>],
    blocks: &[usize],
) -> bool {
    let combos: f64 = blocks.iter().map(|&b| model.partition().block(b).len() as f64).product();
    if combos > rows.len() as f64 {
        return false;
    }
    projections(rows, blocks).len() as f64 == combos
}

/// The ordered family for `order = (b1, ..., bl)`: for each `i`, every
/// tuple in `V_b1 x ... x V_bi x (S_b(i+1) \ V)` divides some row, and so
/// does every tuple in `V_b1 x ... x V_bl`.
fn ordered_family_holds(
    geometry: &IndexGeometry,
    rows: &[BTreeMap<usize, usize>],
    order: &[usize],
) -> bool {
    let block = |b: usize| &geometry.blocks[geometry.touched_position(b).unwrap_or(0)];
    for len in 1..=order.len() {
        let seen = projections(rows, &order[..len]);
        let mut factors: Vec<Vec<usize>> =
            order[..len - 1].iter().map(|&b| block(b).varied.clone()).collect();
        factors.push(block(order[len - 1]).free.clone());
        if !factors.into_iter().multi_cartesian_product().all(|h| seen.contains(&h)) {
            return false;
        }
        if len == order.len() {
            let all_varied = order.iter().map(|&b| block(b).varied.clone()).multi_cartesian_product();
            if !all_varied.into_iter().all(|h| seen.contains(&h)) {
                return false;
            }
        }
    }
    true
}

/// Largest Pythagorean gap over seeded random parameters, targets and
/// points of `L_sensi`.
fn certify(model: &MonomialModel, geometry: &IndexGeometry, support: &HSupport) -> Result<f64> {
    let partition = model.partition();
    let mut rng = ChaCha8Rng::seed_from_u64(CERTIFY_SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..CERTIFY_THETAS {
        let mut theta = vec![0.0; model.n_params()];
        for block in partition.blocks() {
            let n = block.len() as f64;
            for (&j, x) in block.iter().zip(dirichlet_ones(&mut rng, block.len(), 1.0)) {
                theta[j] = 0.8 * x + 0.2 / n;
            }
        }
        let mut targets = BTreeMap::new();
        for tb in &geometry.blocks {
            let members = partition.block(tb.block);
            let n = members.len() as f64;
            let draw = dirichlet_ones(&mut rng, members.len(), 1.0);
            for (&j, x) in members.iter().zip(draw) {
                if tb.varied.contains(&j) {
                    targets.insert(j, 0.8 * x + 0.2 / n);
                }
            }
        }
        let (ptilde, factors) = proportional_point(model, &theta, &targets)?;
        for _ in 0..CERTIFY_SAMPLES {
            let q = sample_l_sensi(geometry, &theta, &targets, &mut rng);
            let report = evaluate(model, geometry, support, &theta, &ptilde, &factors, &q);
            worst = worst.max(report.gap.abs());
        }
    }
    if worst.is_nan() {
        return Err(ModelError::InvalidTheta("non-finite divergence while certifying".into()).into());
    }
    Ok(worst)
}
