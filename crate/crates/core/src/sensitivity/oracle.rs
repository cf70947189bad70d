use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::geometry::index_geometry;
use super::residual::proportional_point;
use super::{Result, SensitivityError};
use crate::divergence::kl_raw;
use crate::model::{MonomialModel, ParameterVector};

/// Largest number of free covaried coordinates searched exhaustively.
pub const MAX_FREE_DIMENSIONS: usize = 4;
/// Largest number of grid candidates evaluated by one search.
pub const MAX_CANDIDATES: usize = 5_000_000;
const MIN_GRID: usize = 10;

/// Outcome of the exhaustive search for the I-projection onto `L_sensi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    /// Best point found, the proportional point included.
    pub argmin_theta: ParameterVector,
    /// `D(Q*||P)` at the argmin.
    pub min_kl: f64,
    /// `D(P~||P)` for the proportional covariation `P~`.
    pub proportional_kl: f64,
    /// Smallest divergence over the grid alone.
    pub grid_min_kl: f64,
    /// Largest per-block grid step.
    pub grid_step: f64,
    /// Grid step of each touched block, `(1 - |targets in block|) / m`.
    pub block_steps: Vec<f64>,
    /// Argmin and proportional point agree within one grid step per
    /// coordinate.
    pub matches_proportional: bool,
    /// The injected proportional point beat every grid point.
    pub argmin_is_proportional: bool,
    pub candidates: usize,
    pub free_dimensions: usize,
}

/// Compositions of `total` into `parts` positive integers, ascending
/// lexicographically.
fn compositions(total: usize, parts: usize) -> Vec<Vec<u32>> {
    fn rec(left: usize, parts: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if parts == 1 {
            prefix.push(left as u32);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in 1..=left - (parts - 1) {
            prefix.push(first as u32);
            rec(left - first, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if parts >= 1 && total >= parts {
        rec(total, parts, &mut Vec::with_capacity(parts), &mut out);
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Searches `L_sensi` on a grid for the distribution closest to `P` in
/// I-divergence.
///
/// The free coordinates of each touched block run over the positive grid
/// points of the sub-simplex with mass `1 - |targets in block|`, step
/// `mass / grid_m`. The proportional covariation is evaluated as an extra
/// candidate. Ties are broken towards the lexicographically smaller
/// coordinate vector, so parallel and serial runs pick the same argmin.
pub fn i_projection_oracle(
    model: &MonomialModel,
    theta: &ParameterVector,
    targets: &BTreeMap<usize, f64>,
    grid_m: usize,
) -> Result<ProjectionResult> {
    if grid_m < MIN_GRID {
        return Err(SensitivityError::GridTooCoarse(grid_m, MIN_GRID));
    }
    theta.check(model.partition())?;
    let varied: Vec<usize> = targets.keys().copied().collect();
    let geometry = index_geometry(model, &varied)?;
    let dims = geometry.free_dimensions();
    if dims > MAX_FREE_DIMENSIONS {
        return Err(SensitivityError::DimensionTooLarge { dims, limit: MAX_FREE_DIMENSIONS });
    }
    let count: f64 = geometry
        .blocks
        .iter()
        .map(|b| binomial(grid_m - 1, b.free.len() - 1))
        .product();
    if count > MAX_CANDIDATES as f64 {
        return Err(SensitivityError::TooManyCandidates { count, limit: MAX_CANDIDATES });
    }
    let (ptilde, _) = proportional_point(model, theta.values(), targets)?;

    let masses: Vec<f64> = geometry
        .blocks
        .iter()
        .map(|b| 1.0 - b.varied.iter().map(|j| targets[j]).sum::<f64>())
        .collect();
    let block_steps: Vec<f64> = masses.iter().map(|m| m / grid_m as f64).collect();
    let lists: Vec<Vec<Vec<u32>>> =
        geometry.blocks.iter().map(|b| compositions(grid_m, b.free.len())).collect();
    let candidates: usize = lists.iter().map(Vec::len).product();

    let mut base = ptilde.clone();
    for (&j, &t) in targets {
        base[j] = t;
    }
    let p = model.distribution_unchecked(theta.values());
    let fill = |index: usize, values: &mut [f64]| {
        let mut rest = index;
        for (b, block) in geometry.blocks.iter().enumerate().rev() {
            let list = &lists[b];
            let parts = &list[rest % list.len()];
            rest /= list.len();
            for (&j, &k) in block.free.iter().zip(parts) {
                values[j] = k as f64 * block_steps[b];
            }
        }
    };
    let kl_at = |values: &[f64]| kl_raw(&model.distribution_unchecked(values), &p);

    let (grid_min_kl, best) = (0..candidates)
        .into_par_iter()
        .map_init(
            || base.clone(),
            |values, index| {
                fill(index, values);
                (kl_at(values), index)
            },
        )
        .reduce(
            || (f64::INFINITY, usize::MAX),
            |a, b| match a.0.total_cmp(&b.0) {
                Ordering::Less => a,
                Ordering::Greater => b,
                Ordering::Equal => if a.1 <= b.1 { a } else { b },
            },
        );
    let mut grid_best = base.clone();
    fill(best, &mut grid_best);

    let proportional_kl = kl_at(&ptilde);
    let free: Vec<usize> = geometry.blocks.iter().flat_map(|b| b.free.iter().copied()).collect();
    let coords = |v: &[f64]| free.iter().map(|&j| v[j]).collect::<Vec<f64>>();
    let proportional_wins = match proportional_kl.total_cmp(&grid_min_kl) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => coords(&ptilde)
            .iter()
            .zip(coords(&grid_best))
            .find(|(a, b)| *a != b)
            .is_none_or(|(a, b)| *a < b),
    };
    let (argmin, min_kl) =
        if proportional_wins { (ptilde.clone(), proportional_kl) } else { (grid_best, grid_min_kl) };
    let partition = model.partition();
    let matches_proportional = free.iter().all(|&j| {
        let pos = geometry.touched_position(partition.block_of(j)).unwrap_or(0);
        (argmin[j] - ptilde[j]).abs() <= block_steps[pos] * (1.0 + 1e-9)
    });

    Ok(ProjectionResult {
        argmin_theta: theta.with_values(argmin)?,
        min_kl,
        proportional_kl,
        grid_min_kl,
        grid_step: block_steps.iter().copied().fold(0.0, f64::max),
        block_steps,
        matches_proportional,
        argmin_is_proportional: proportional_wins,
        candidates,
        free_dimensions: dims,
    })
}
