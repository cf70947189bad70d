//! Covariation schemes: how the rest of a simplex block moves when some of
//! its parameters are set to new values.
//!
//! The block-level functions work on a plain slice holding one block and
//! local indices into it. [`covary`] applies them block by block to a whole
//! parameter vector and leaves untouched blocks alone.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, MonomialModel, ParameterVector, POSITIVITY_MARGIN};

/// Residual mass below which proportional scaling is refused.
pub const MIN_RESIDUAL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Proportional,
    Uniform,
    OrderPreserving,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proportional => "proportional",
            Scheme::Uniform => "uniform",
            Scheme::OrderPreserving => "order_preserving",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "proportional" => Ok(Scheme::Proportional),
            "uniform" => Ok(Scheme::Uniform),
            "order_preserving" => Ok(Scheme::OrderPreserving),
            other => Err(format!(
                "unknown scheme `{other}`; expected proportional, uniform or order_preserving"
            )),
        }
    }
}

/// Failure of a single-block scheme. Indices are local to the block.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BlockError {
    #[error("no parameter of the block is varied")]
    NothingVaried,
    #[error("local index {0} is outside the block")]
    IndexOutOfRange(usize),
    #[error("local index {0} is varied twice")]
    DuplicateIndex(usize),
    #[error("the whole block is varied; at least one parameter must absorb the change")]
    NoComplement,
    #[error("target {0} must lie strictly between 0 and 1")]
    TargetOutOfRange(f64),
    #[error("targets sum to {0}; the varied mass must lie strictly between 0 and 1")]
    TargetMassOutOfRange(f64),
    #[error("the non-varied parameters carry mass {0}; proportional scaling is undefined")]
    ZeroResidual(f64),
    #[error("the scheme would set a parameter to {0}, which is not strictly positive")]
    DegenerateOutput(f64),
    #[error("the order-preserving scheme varies a single parameter, got {0}")]
    OrderPreservingArity(usize),
    #[error("the varied parameter {0} has no strictly larger component in its block")]
    LargestComponent(f64),
    #[error("target {target} outside the order-preserving range (0, {max})")]
    OrderPreservingRange { target: f64, max: f64 },
}

impl BlockError {
    pub fn code(&self) -> &'static str {
        match self {
            BlockError::NothingVaried => "NothingVaried",
            BlockError::IndexOutOfRange(_) => "IndexOutOfRange",
            BlockError::DuplicateIndex(_) => "DuplicateIndex",
            BlockError::NoComplement => "NoComplement",
            BlockError::TargetOutOfRange(_) => "TargetOutOfRange",
            BlockError::TargetMassOutOfRange(_) => "TargetMassOutOfRange",
            BlockError::ZeroResidual(_) => "ZeroResidual",
            BlockError::DegenerateOutput(_) => "DegenerateOutput",
            BlockError::OrderPreservingArity(_) => "OrderPreservingArity",
            BlockError::LargestComponent(_) => "LargestComponent",
            BlockError::OrderPreservingRange { .. } => "OrderPreservingRange",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CovariationError {
    #[error("a variation must change at least one parameter")]
    EmptyVariation,
    #[error("parameter {} is not part of the model", .0 + 1)]
    UnknownParameter(usize),
    #[error("block {} ({scheme}): {error}", .block + 1)]
    Block { block: usize, scheme: Scheme, error: BlockError },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl CovariationError {
    pub fn code(&self) -> &'static str {
        match self {
            CovariationError::EmptyVariation => "EmptyVariation",
            CovariationError::UnknownParameter(_) => "UnknownParameter",
            CovariationError::Block { error, .. } => error.code(),
            CovariationError::Model(e) => e.code(),
        }
    }
}

type BlockResult<T> = Result<T, BlockError>;

fn check_varied(theta_s: &[f64], varied: &[(usize, f64)]) -> BlockResult<f64> {
    if varied.is_empty() {
        return Err(BlockError::NothingVaried);
    }
    let mut seen = vec![false; theta_s.len()];
    for &(j, t) in varied {
        if j >= theta_s.len() {
            return Err(BlockError::IndexOutOfRange(j));
        }
        if std::mem::replace(&mut seen[j], true) {
            return Err(BlockError::DuplicateIndex(j));
        }
        if !(t > POSITIVITY_MARGIN && t < 1.0 - POSITIVITY_MARGIN) {
            return Err(BlockError::TargetOutOfRange(t));
        }
    }
    if varied.len() == theta_s.len() {
        return Err(BlockError::NoComplement);
    }
    let mass: f64 = varied.iter().map(|&(_, t)| t).sum();
    if !(mass > 0.0 && mass < 1.0) {
        return Err(BlockError::TargetMassOutOfRange(mass));
    }
    Ok(mass)
}

fn check_output(out: Vec<f64>) -> BlockResult<Vec<f64>> {
    match out.iter().find(|&&x| !(x > POSITIVITY_MARGIN)) {
        Some(&x) => Err(BlockError::DegenerateOutput(x)),
        None => Ok(out),
    }
}

/// Factor applied to the non-varied entries under proportional covariation.
pub fn proportional_factor(theta_s: &[f64], varied: &[(usize, f64)]) -> BlockResult<f64> {
    let mass = check_varied(theta_s, varied)?;
    let original: f64 = varied.iter().map(|&(j, _)| theta_s[j]).sum();
    let residual = 1.0 - original;
    if residual < MIN_RESIDUAL {
        return Err(BlockError::ZeroResidual(residual));
    }
    Ok((1.0 - mass) / residual)
}

/// Sets the varied entries and rescales the others by a common factor.
pub fn covary_block_proportional(theta_s: &[f64], varied: &[(usize, f64)]) -> BlockResult<Vec<f64>> {
    let factor = proportional_factor(theta_s, varied)?;
    let mut out: Vec<f64> = theta_s.iter().map(|&x| x * factor).collect();
    for &(j, t) in varied {
        out[j] = t;
    }
    check_output(out)
}

/// Sets the varied entries and spreads the remaining mass evenly.
pub fn covary_block_uniform(theta_s: &[f64], varied: &[(usize, f64)]) -> BlockResult<Vec<f64>> {
    let mass = check_varied(theta_s, varied)?;
    let share = (1.0 - mass) / (theta_s.len() - varied.len()) as f64;
    let mut out = vec![share; theta_s.len()];
    for &(j, t) in varied {
        out[j] = t;
    }
    check_output(out)
}

/// Sorted-frame view of one block, ascending with ties broken by index.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderFrame {
    /// `order[p]` is the local index at sorted position `p` (0-based).
    pub order: Vec<usize>,
    /// 0-based sorted position of the varied index.
    pub position: usize,
    /// Upper bound `1 / (1 + #S - p)` with `p` the 1-based position.
    pub theta_max: f64,
    /// Mass of the components sorted above the varied one.
    pub theta_suc: f64,
}

/// Sorted frame and bounds for varying local index `v`.
pub fn order_frame(theta_s: &[f64], v: usize) -> BlockResult<OrderFrame> {
    if v >= theta_s.len() {
        return Err(BlockError::IndexOutOfRange(v));
    }
    let mut order: Vec<usize> = (0..theta_s.len()).collect();
    order.sort_by(|&a, &b| theta_s[a].total_cmp(&theta_s[b]).then(a.cmp(&b)));
    let position = order.iter().position(|&j| j == v).unwrap_or(0);
    if !theta_s.iter().any(|&x| x > theta_s[v]) {
        return Err(BlockError::LargestComponent(theta_s[v]));
    }
    let theta_max = 1.0 / (theta_s.len() - position) as f64;
    let theta_suc = order[position + 1..].iter().map(|&j| theta_s[j]).sum();
    Ok(OrderFrame { order, position, theta_max, theta_suc })
}

/// Moves one parameter while keeping the ascending order of the block.
///
/// Below the varied component entries scale; above it they move affinely,
/// towards `theta_max` when the parameter increases. The result is reported
/// in the original index order.
pub fn covary_block_order_preserving(theta_s: &[f64], v: usize, target: f64) -> BlockResult<Vec<f64>> {
    check_varied(theta_s, &[(v, target)])?;
    let frame = order_frame(theta_s, v)?;
    let t_v = theta_s[v];
    let (max, suc) = (frame.theta_max, frame.theta_suc);
    if !(target > POSITIVITY_MARGIN && target < max - POSITIVITY_MARGIN) {
        return Err(BlockError::OrderPreservingRange { target, max });
    }
    if target == t_v {
        return Ok(theta_s.to_vec());
    }
    let mut out = vec![0.0; theta_s.len()];
    for (p, &j) in frame.order.iter().enumerate() {
        let t_j = theta_s[j];
        out[j] = if p == frame.position {
            target
        } else if target <= t_v {
            if p < frame.position {
                target / t_v * t_j
            } else {
                t_j / suc - t_j * (1.0 - suc) / suc * target / t_v
            }
        } else if p < frame.position {
            t_j * (max - target) / (max - t_v)
        } else {
            (max - target) * (t_j - max) / (max - t_v) + max
        };
    }
    check_output(out)
}

/// Which parameters move, to what, and under which scheme per block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationSpec {
    varied: BTreeMap<usize, f64>,
    scheme: Scheme,
    #[serde(default)]
    block_schemes: BTreeMap<usize, Scheme>,
}

impl VariationSpec {
    /// One scheme for every touched block. Rejects an empty variation.
    pub fn new(varied: BTreeMap<usize, f64>, scheme: Scheme) -> Result<Self, CovariationError> {
        if varied.is_empty() {
            return Err(CovariationError::EmptyVariation);
        }
        Ok(VariationSpec { varied, scheme, block_schemes: BTreeMap::new() })
    }

    pub fn single(param: usize, target: f64, scheme: Scheme) -> Self {
        VariationSpec { varied: BTreeMap::from([(param, target)]), scheme, block_schemes: BTreeMap::new() }
    }

    /// Overrides the scheme of one block.
    pub fn with_block_scheme(mut self, block: usize, scheme: Scheme) -> Self {
        self.block_schemes.insert(block, scheme);
        self
    }

    pub fn varied(&self) -> &BTreeMap<usize, f64> {
        &self.varied
    }

    pub fn default_scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn scheme_for(&self, block: usize) -> Scheme {
        self.block_schemes.get(&block).copied().unwrap_or(self.scheme)
    }

    /// Same parameters and schemes, new targets.
    pub fn with_targets(&self, targets: &[f64]) -> Self {
        let varied = self.varied.keys().copied().zip(targets.iter().copied()).collect();
        VariationSpec { varied, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariationResult {
    pub theta_new: ParameterVector,
    /// Blocks holding at least one varied parameter, ascending.
    pub touched_blocks: Vec<usize>,
    /// Per touched block, `(1 - |new V_i|) / (1 - |old V_i|)` when the block
    /// was covaried proportionally.
    pub scale_factors: Vec<Option<f64>>,
}

/// Applies `spec` to `theta`, block by block.
pub fn covary(
    model: &MonomialModel,
    theta: &ParameterVector,
    spec: &VariationSpec,
) -> Result<CovariationResult, CovariationError> {
    theta.check(model.partition())?;
    covary_values(model, theta.values(), spec).and_then(|(values, touched, factors)| {
        Ok(CovariationResult {
            theta_new: theta.with_values(values)?,
            touched_blocks: touched,
            scale_factors: factors,
        })
    })
}

type Covaried = (Vec<f64>, Vec<usize>, Vec<Option<f64>>);

/// [`covary`] on raw values that are already known to be valid.
pub(crate) fn covary_values(
    model: &MonomialModel,
    values: &[f64],
    spec: &VariationSpec,
) -> Result<Covaried, CovariationError> {
    let partition = model.partition();
    let mut by_block: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for (&j, &t) in &spec.varied {
        if j >= values.len() {
            return Err(CovariationError::UnknownParameter(j));
        }
        let b = partition.block_of(j);
        let local = partition.block(b).iter().position(|&x| x == j).unwrap_or(0);
        by_block.entry(b).or_default().push((local, t));
    }
    let mut out = values.to_vec();
    let mut touched = Vec::with_capacity(by_block.len());
    let mut factors = Vec::with_capacity(by_block.len());
    for (b, local) in by_block {
        let scheme = spec.scheme_for(b);
        let wrap = |error| CovariationError::Block { block: b, scheme, error };
        let block = partition.block(b);
        let theta_s: Vec<f64> = block.iter().map(|&j| values[j]).collect();
        let (new_s, factor) = match scheme {
            Scheme::Proportional => {
                let factor = proportional_factor(&theta_s, &local).map_err(wrap)?;
                (covary_block_proportional(&theta_s, &local).map_err(wrap)?, Some(factor))
            }
            Scheme::Uniform => (covary_block_uniform(&theta_s, &local).map_err(wrap)?, None),
            Scheme::OrderPreserving => match local.as_slice() {
                &[(v, t)] => (covary_block_order_preserving(&theta_s, v, t).map_err(wrap)?, None),
                _ => return Err(wrap(BlockError::OrderPreservingArity(local.len()))),
            },
        };
        for (&j, x) in block.iter().zip(new_s) {
            out[j] = x;
        }
        touched.push(b);
        factors.push(factor);
    }
    Ok((out, touched, factors))
}
