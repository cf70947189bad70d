use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Result, SensitivityError};
use crate::covariation::{covary_values, Scheme, VariationSpec};
use crate::divergence::{cd_raw, kl_raw};
use crate::model::{AtomEvent, ModelError, MonomialModel, ParameterVector};

/// One grid point of a sensitivity curve or surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Target value of each varied parameter.
    pub targets: Vec<f64>,
    /// Event probability, absent where the scheme is undefined.
    pub probability: Option<f64>,
    /// `D(P~||P)` at this point.
    pub kl: Option<f64>,
    /// CD distance between `P` and `P~`.
    pub cd: Option<f64>,
    /// Why the point is absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub absent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCurve {
    pub params: Vec<usize>,
    pub scheme: Scheme,
    pub event: Vec<usize>,
    pub resolution: usize,
    pub points: Vec<CurvePoint>,
}

impl SensitivityCurve {
    /// Present points as `(target of the first parameter, probability)`.
    pub fn series(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter_map(|p| p.probability.map(|v| (p.targets[0], v)))
            .collect()
    }

    /// Targets where a one-parameter curve crosses `level`, interpolated
    /// linearly between adjacent present points.
    pub fn crossings(&self, level: f64) -> Vec<f64> {
        let series = self.series();
        let mut out = Vec::new();
        if let Some(&(x, y)) = series.first() {
            if y == level {
                out.push(x);
            }
        }
        for w in series.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if y1 == level {
                out.push(x1);
            } else if (y0 - level) * (y1 - level) < 0.0 {
                out.push(x0 + (level - y0) * (x1 - x0) / (y1 - y0));
            }
        }
        out
    }

    /// Range of event probabilities over present points.
    pub fn value_range(&self) -> Option<(f64, f64)> {
        self.points.iter().filter_map(|p| p.probability).fold(None, |acc, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }
}

/// Grid values `i / (m + 1)` for `i = 1..=m`.
pub fn grid_values(resolution: usize) -> Vec<f64> {
    (1..=resolution).map(|i| i as f64 / (resolution + 1) as f64).collect()
}

/// Event probability as one or two parameters sweep the open unit interval.
///
/// Each varied parameter takes the values `i / (m + 1)`, `i = 1..=m`; with
/// two parameters the grid is their product, first parameter outermost.
/// Points where the scheme is undefined are kept with no values.
pub fn sensitivity_function(
    model: &MonomialModel,
    theta: &ParameterVector,
    varied: &[usize],
    scheme: Scheme,
    event: &AtomEvent,
    resolution: usize,
) -> Result<SensitivityCurve> {
    if resolution < 2 {
        return Err(SensitivityError::GridTooCoarse(resolution, 2));
    }
    match varied.len() {
        0 => return Err(SensitivityError::EmptyVariation),
        1 | 2 => {}
        n => return Err(SensitivityError::TooManyVaried(n)),
    }
    if varied.len() == 2 && varied[0] == varied[1] {
        return Err(SensitivityError::DuplicateParameter(varied[0]));
    }
    if let Some(&j) = varied.iter().find(|&&j| j >= model.n_params()) {
        return Err(SensitivityError::UnknownParameter(j));
    }
    if event.atoms().is_empty() {
        return Err(ModelError::EmptyEvent.into());
    }
    if let Some(&a) = event.atoms().iter().find(|&&a| a >= model.n_atoms()) {
        return Err(ModelError::AtomOutOfRange { index: a, n_atoms: model.n_atoms() }.into());
    }
    theta.check(model.partition())?;

    let axis = grid_values(resolution);
    let grid: Vec<Vec<f64>> = if varied.len() == 1 {
        axis.iter().map(|&x| vec![x]).collect()
    } else {
        axis.iter().flat_map(|&x| axis.iter().map(move |&y| vec![x, y])).collect()
    };
    let base = model.distribution_unchecked(theta.values());
    let points = grid
        .into_par_iter()
        .map(|targets| {
            let map: BTreeMap<usize, f64> = varied.iter().copied().zip(targets.iter().copied()).collect();
            let spec = match VariationSpec::new(map, scheme) {
                Ok(s) => s,
                Err(e) => return absent(targets, e.to_string()),
            };
            match covary_values(model, theta.values(), &spec) {
                Ok((values, _, _)) => {
                    let dist = model.distribution_unchecked(&values);
                    let probability = event.atoms().iter().map(|&a| dist[a]).sum();
                    CurvePoint {
                        targets,
                        probability: Some(probability),
                        kl: Some(kl_raw(&dist, &base)),
                        cd: Some(cd_raw(&base, &dist)),
                        absent: None,
                    }
                }
                Err(e) => absent(targets, e.to_string()),
            }
        })
        .collect();
    Ok(SensitivityCurve {
        params: varied.to_vec(),
        scheme,
        event: event.atoms().to_vec(),
        resolution,
        points,
    })
}

fn absent(targets: Vec<f64>, reason: String) -> CurvePoint {
    CurvePoint { targets, probability: None, kl: None, cd: None, absent: Some(reason) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ExponentMatrix, SimplexPartition};
    use approx::assert_abs_diff_eq;

    fn saturated() -> (MonomialModel, ParameterVector) {
        let model = MonomialModel::new(
            ExponentMatrix::from_supports(3, vec![vec![0], vec![1], vec![2]]).unwrap(),
            SimplexPartition::new(3, vec![vec![0, 1, 2]]).unwrap(),
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap();
        (model, ParameterVector::unlabeled(vec![0.2, 0.3, 0.5]))
    }

    #[test]
    fn grid_is_open_interval() {
        let g = grid_values(99);
        assert_eq!(g.len(), 99);
        assert_abs_diff_eq!(g[0], 0.01);
        assert_abs_diff_eq!(g[98], 0.99);
    }

    #[test]
    fn proportional_curve_is_linear_in_the_varied_parameter() {
        let (m, theta) = saturated();
        let event = AtomEvent::new(vec![1], 3).unwrap();
        let curve = sensitivity_function(&m, &theta, &[0], Scheme::Proportional, &event, 9).unwrap();
        for p in &curve.points {
            let t = p.targets[0];
            assert_abs_diff_eq!(p.probability.unwrap(), 0.3 * (1.0 - t) / 0.8, epsilon = 1e-15);
        }
        let at_original = sensitivity_function(&m, &theta, &[0], Scheme::Proportional, &event, 4).unwrap();
        // 0.2 is the first grid point for m = 4
        assert_abs_diff_eq!(at_original.points[0].kl.unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn order_preserving_marks_points_absent() {
        let (m, theta) = saturated();
        let event = AtomEvent::new(vec![2], 3).unwrap();
        let curve = sensitivity_function(&m, &theta, &[0], Scheme::OrderPreserving, &event, 9).unwrap();
        // bound is 1/3 for the smallest component
        let present: Vec<f64> = curve.series().iter().map(|p| p.0).collect();
        assert_eq!(present, vec![0.1, 0.2, 0.3]);
        assert!(curve.points[5].absent.is_some());
    }

    #[test]
    fn crossings_interpolate() {
        let (m, theta) = saturated();
        let event = AtomEvent::new(vec![1], 3).unwrap();
        let curve = sensitivity_function(&m, &theta, &[0], Scheme::Proportional, &event, 99).unwrap();
        let x = curve.crossings(0.15);
        assert_eq!(x.len(), 1);
        assert_abs_diff_eq!(x[0], 1.0 - 0.15 * 0.8 / 0.3, epsilon = 1e-12);
    }

    #[test]
    fn surface_and_errors() {
        let (m, theta) = saturated();
        let event = AtomEvent::all(3);
        let s = sensitivity_function(&m, &theta, &[0, 1], Scheme::Uniform, &event, 4).unwrap();
        assert_eq!(s.points.len(), 16);
        // targets summing to 1 or more leave no mass for the third parameter
        assert!(s.points[15].probability.is_none());
        assert_abs_diff_eq!(s.points[0].probability.unwrap(), 1.0, epsilon = 1e-15);
        assert!(matches!(
            sensitivity_function(&m, &theta, &[0], Scheme::Uniform, &event, 1),
            Err(SensitivityError::GridTooCoarse(1, 2))
        ));
        assert!(matches!(
            sensitivity_function(&m, &theta, &[0, 1, 2], Scheme::Uniform, &event, 4),
            Err(SensitivityError::TooManyVaried(3))
        ));
    }
}
