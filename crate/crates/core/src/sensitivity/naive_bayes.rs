use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::classify::{classify_analysis, AnalysisKind};
use super::geometry::{h_support, index_geometry};
use super::oracle::{i_projection_oracle, MAX_FREE_DIMENSIONS};
use super::residual::{evaluate, proportional_point, sample_l_sensi};
use super::{Result, SensitivityError, RESIDUAL_TOLERANCE};
use crate::compile::{build_classifier, compile_bn, ClassifierSpec, ClassifierStructure};

/// Agreement of the grid search with proportional covariation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleAgreement {
    pub matches_proportional: bool,
    pub min_kl: f64,
    pub proportional_kl: f64,
    pub grid_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesReport {
    pub kind: AnalysisKind,
    pub samples: usize,
    /// Largest `|residual|` over the sampled `Q`.
    pub max_residual: f64,
    /// Largest `|D(Q||P) - D(Q||P~) - D(P~||P)|` over the sampled `Q`.
    pub max_gap: f64,
    /// Every sample satisfied the identity within tolerance.
    pub optimal: bool,
    /// Present when the covaried blocks have few enough free coordinates.
    pub oracle: Option<OracleAgreement>,
}

/// Checks that proportional covariation of feature parameters of a naive
/// Bayes or SPODE classifier is the I-projection onto `L_sensi`.
///
/// `targets` are keyed by parameter index of the compiled network. The
/// identity is tested on `samples` uniform draws from `L_sensi`; with
/// `oracle_grid` set and a small enough search space the grid oracle is
/// consulted as well.
pub fn verify_naive_bayes_optimality(
    spec: &ClassifierSpec,
    targets: &BTreeMap<usize, f64>,
    samples: usize,
    seed: u64,
    oracle_grid: Option<usize>,
) -> Result<NaiveBayesReport> {
    let super_parent = match spec.structure {
        ClassifierStructure::NaiveBayes => false,
        ClassifierStructure::Spode { .. } => true,
        ClassifierStructure::General { .. } => return Err(SensitivityError::UnsupportedStructure),
    };
    let compiled = compile_bn(&build_classifier(spec)?)?;
    let model = &compiled.model;
    let block_variables = compiled.block_variables.as_deref().unwrap_or_default();
    for &j in targets.keys() {
        if j >= model.n_params() {
            return Err(SensitivityError::UnknownParameter(j));
        }
        // the class is variable 0 and a super parent variable 1
        match block_variables.get(model.partition().block_of(j)) {
            Some(0) => return Err(SensitivityError::ClassParameter(j)),
            Some(1) if super_parent => return Err(SensitivityError::SuperParentParameter(j)),
            _ => {}
        }
    }
    let varied: Vec<usize> = targets.keys().copied().collect();
    let class = classify_analysis(model, &varied)?;
    let geometry = index_geometry(model, &varied)?;
    let support = h_support(model, &geometry)?;
    let theta = compiled.theta.values();
    let (ptilde, factors) = proportional_point(model, theta, targets)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut max_residual, mut max_gap) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let q = sample_l_sensi(&geometry, theta, targets, &mut rng);
        let r = evaluate(model, &geometry, &support, theta, &ptilde, &factors, &q);
        max_residual = max_residual.max(r.residual.abs());
        max_gap = max_gap.max(r.gap.abs());
    }
    let oracle = match oracle_grid {
        Some(m) if geometry.free_dimensions() <= MAX_FREE_DIMENSIONS => {
            match i_projection_oracle(model, &compiled.theta, targets, m) {
                Ok(r) => Some(OracleAgreement {
                    matches_proportional: r.matches_proportional,
                    min_kl: r.min_kl,
                    proportional_kl: r.proportional_kl,
                    grid_step: r.grid_step,
                }),
                Err(SensitivityError::TooManyCandidates { .. }) => None,
                Err(e) => return Err(e),
            }
        }
        _ => None,
    };
    Ok(NaiveBayesReport {
        kind: class.kind,
        samples,
        max_residual,
        max_gap,
        optimal: max_gap < RESIDUAL_TOLERANCE,
        oracle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compile::Variable;

    fn classifier(structure: ClassifierStructure) -> ClassifierSpec {
        let c = Variable::numbered("C", 2);
        let features = vec![Variable::numbered("X1", 3), Variable::numbered("X2", 2)];
        let mut cpts = BTreeMap::new();
        cpts.insert("C".to_string(), vec![vec![0.6, 0.4]]);
        match structure {
            ClassifierStructure::Spode { .. } => {
                cpts.insert("X1".into(), vec![vec![0.2, 0.3, 0.5], vec![0.5, 0.25, 0.25]]);
                cpts.insert(
                    "X2".into(),
                    vec![
                        vec![0.9, 0.1],
                        vec![0.7, 0.3],
                        vec![0.4, 0.6],
                        vec![0.2, 0.8],
                        vec![0.35, 0.65],
                        vec![0.55, 0.45],
                    ],
                );
            }
            _ => {
                cpts.insert("X1".into(), vec![vec![0.2, 0.3, 0.5], vec![0.5, 0.25, 0.25]]);
                cpts.insert("X2".into(), vec![vec![0.9, 0.1], vec![0.3, 0.7]]);
            }
        }
        ClassifierSpec { class: c, features, structure, cpts }
    }

    #[test]
    fn naive_bayes_feature_variation_is_optimal() {
        let spec = classifier(ClassifierStructure::NaiveBayes);
        // params: C(0,1), X1|C=1 (2,3,4), X1|C=2 (5,6,7), X2|C=1 (8,9), X2|C=2 (10,11)
        let targets = BTreeMap::from([(2, 0.4), (8, 0.6)]);
        let r = verify_naive_bayes_optimality(&spec, &targets, 200, 3, Some(40)).unwrap();
        assert!(r.optimal, "gap {}", r.max_gap);
        assert!(r.max_residual < 1e-10);
        assert!(r.oracle.unwrap().matches_proportional);
        assert_ne!(r.kind, AnalysisKind::Other);
    }

    #[test]
    fn spode_feature_variation_is_optimal() {
        let spec = classifier(ClassifierStructure::Spode { super_parent: "X1".into() });
        let targets = BTreeMap::from([(8, 0.5), (15, 0.3)]);
        let r = verify_naive_bayes_optimality(&spec, &targets, 200, 5, None).unwrap();
        assert!(r.optimal, "gap {}", r.max_gap);
        assert!(r.oracle.is_none());
    }

    #[test]
    fn excluded_parameters() {
        let nb = classifier(ClassifierStructure::NaiveBayes);
        assert!(matches!(
            verify_naive_bayes_optimality(&nb, &BTreeMap::from([(0, 0.5)]), 1, 0, None),
            Err(SensitivityError::ClassParameter(0))
        ));
        let spode = classifier(ClassifierStructure::Spode { super_parent: "X1".into() });
        assert!(matches!(
            verify_naive_bayes_optimality(&spode, &BTreeMap::from([(3, 0.5)]), 1, 0, None),
            Err(SensitivityError::SuperParentParameter(3))
        ));
        let general = classifier(ClassifierStructure::General { edges: vec![] });
        assert!(matches!(
            verify_naive_bayes_optimality(&general, &BTreeMap::from([(3, 0.5)]), 1, 0, None),
            Err(SensitivityError::UnsupportedStructure)
        ));
    }
}
