use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::geometry::{h_support, index_geometry, HSupport, IndexGeometry};
use super::{Result, SensitivityError, RESIDUAL_TOLERANCE};
use crate::covariation::{covary_values, Scheme, VariationSpec};
use crate::divergence::kl_raw;
use crate::model::{MonomialModel, ParameterVector};

/// Largest coordinate difference tolerated when checking `Q` against the
/// fixed and varied coordinates of `L_sensi`.
pub const SLICE_TOLERANCE: f64 = 1e-12;

/// The residual of a `Q` in `L_sensi` next to the three divergences it
/// relates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PythagoreanReport {
    /// `sum_H theta~_{V∩H} (theta-_{(C\V)∩H} - theta~_{(C\V)∩H})
    ///  ln(alpha theta~_{V∩H} / theta_{V∩H}) sum_{y in Y_H} theta_F^{A_{y,F}}`.
    pub residual: f64,
    /// `D(Q||P) - D(Q||P~) - D(P~||P)`, computed atom by atom.
    pub gap: f64,
    pub kl_q_p: f64,
    pub kl_q_ptilde: f64,
    pub kl_ptilde_p: f64,
    /// `|gap| < 1e-10`.
    pub identity_holds: bool,
}

/// Proportional covariation of `values` at `targets`, with the per-block
/// scale factors in the order of `geometry.blocks`.
pub(crate) fn proportional_point(
    model: &MonomialModel,
    values: &[f64],
    targets: &BTreeMap<usize, f64>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let spec = VariationSpec::new(targets.clone(), Scheme::Proportional)?;
    let (out, _, factors) = covary_values(model, values, &spec)?;
    Ok((out, factors.into_iter().map(|f| f.unwrap_or(1.0)).collect()))
}

/// Evaluates the residual sum over the `H` sets.
pub(crate) fn residual_sum(
    model: &MonomialModel,
    geometry: &IndexGeometry,
    support: &HSupport,
    theta: &[f64],
    ptilde: &[f64],
    factors: &[f64],
    q: &[f64],
) -> f64 {
    let partition = model.partition();
    let mut total = 0.0;
    for set in &support.sets {
        let mut tilde_v = 1.0;
        let mut orig_v = 1.0;
        let mut bar_c = 1.0;
        let mut tilde_c = 1.0;
        let mut alpha = 1.0;
        for &j in &set.params {
            if geometry.in_v(j) {
                tilde_v *= ptilde[j];
                orig_v *= theta[j];
            } else {
                bar_c *= q[j];
                tilde_c *= ptilde[j];
                let pos = geometry.touched_position(partition.block_of(j)).unwrap_or(0);
                alpha *= factors[pos];
            }
        }
        let diff = bar_c - tilde_c;
        if diff == 0.0 {
            continue;
        }
        let fixed_mass: f64 = set
            .atoms
            .iter()
            .map(|&y| {
                model
                    .matrix()
                    .support(y)
                    .filter(|&j| !geometry.in_c(j))
                    .map(|j| theta[j])
                    .product::<f64>()
            })
            .sum();
        total += tilde_v * diff * (alpha * tilde_v / orig_v).ln() * fixed_mass;
    }
    total
}

pub(crate) fn check_in_slice(
    geometry: &IndexGeometry,
    theta: &[f64],
    targets: &BTreeMap<usize, f64>,
    q: &[f64],
) -> Result<()> {
    for &j in &geometry.fixed {
        if (q[j] - theta[j]).abs() > SLICE_TOLERANCE {
            return Err(SensitivityError::NotInSlice { param: j, expected: theta[j], found: q[j] });
        }
    }
    for (&j, &t) in targets {
        if (q[j] - t).abs() > SLICE_TOLERANCE {
            return Err(SensitivityError::NotInSlice { param: j, expected: t, found: q[j] });
        }
    }
    Ok(())
}

/// Divergence gap and residual on raw values; all inputs already checked.
pub(crate) fn evaluate(
    model: &MonomialModel,
    geometry: &IndexGeometry,
    support: &HSupport,
    theta: &[f64],
    ptilde: &[f64],
    factors: &[f64],
    q: &[f64],
) -> PythagoreanReport {
    let p_dist = model.distribution_unchecked(theta);
    let pt_dist = model.distribution_unchecked(ptilde);
    let q_dist = model.distribution_unchecked(q);
    let kl_q_p = kl_raw(&q_dist, &p_dist);
    let kl_q_ptilde = kl_raw(&q_dist, &pt_dist);
    let kl_ptilde_p = kl_raw(&pt_dist, &p_dist);
    // Same quantity atom by atom, free of the cancellation in the three sums.
    let gap: f64 = q_dist
        .iter()
        .zip(&pt_dist)
        .zip(&p_dist)
        .map(|((&qy, &ty), &py)| (qy - ty) * (ty / py).ln())
        .sum();
    PythagoreanReport {
        residual: residual_sum(model, geometry, support, theta, ptilde, factors, q),
        gap,
        kl_q_p,
        kl_q_ptilde,
        kl_ptilde_p,
        identity_holds: gap.abs() < RESIDUAL_TOLERANCE,
    }
}

/// Residual of the Pythagorean condition for `q` against the proportional
/// covariation of `theta` at `targets`.
///
/// `q` must lie in `L_sensi`: equal to `theta` on `F` and to the targets on
/// `V`. The residual is zero exactly when
/// `D(Q||P) = D(Q||P~) + D(P~||P)`.
pub fn pythagorean_residual(
    model: &MonomialModel,
    theta: &ParameterVector,
    targets: &BTreeMap<usize, f64>,
    q: &ParameterVector,
) -> Result<PythagoreanReport> {
    theta.check(model.partition())?;
    q.check(model.partition())?;
    let varied: Vec<usize> = targets.keys().copied().collect();
    let geometry = index_geometry(model, &varied)?;
    let support = h_support(model, &geometry)?;
    check_in_slice(&geometry, theta.values(), targets, q.values())?;
    let (ptilde, factors) = proportional_point(model, theta.values(), targets)?;
    Ok(evaluate(model, &geometry, &support, theta.values(), &ptilde, &factors, q.values()))
}

/// Uniform draw from the simplex scaled to `mass`, kept off the boundary.
pub(crate) fn dirichlet_ones<R: Rng + ?Sized>(rng: &mut R, n: usize, mass: f64) -> Vec<f64> {
    let draws: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1).max(1e-9)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x| mass * x / total).collect()
}

/// A random point of `L_sensi`: `theta` on `F`, targets on `V`, and for each
/// touched block a uniform draw on the free coordinates with the remaining
/// mass.
pub fn sample_l_sensi<R: Rng + ?Sized>(
    geometry: &IndexGeometry,
    theta: &[f64],
    targets: &BTreeMap<usize, f64>,
    rng: &mut R,
) -> Vec<f64> {
    let mut q = theta.to_vec();
    for (&j, &t) in targets {
        q[j] = t;
    }
    for block in &geometry.blocks {
        let mass: f64 = 1.0 - block.varied.iter().map(|&j| targets[&j]).sum::<f64>();
        for (&j, x) in block.free.iter().zip(dirichlet_ones(rng, block.free.len(), mass)) {
            q[j] = x;
        }
    }
    q
}
