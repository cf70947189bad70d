//! Multi-parameter sensitivity analysis on monomial models.
//!
//! Given varied indices `V`, the parameters split into `V`, the covaried
//! rest `C \ V` of every block touched by `V`, and the fixed set `F`. This
//! module computes that split, the supports `Y_H` of the atoms restricted to
//! `C`, the analysis class of `V`, sensitivity curves, the Pythagorean
//! residual of a distribution `Q` in `L_sensi` and a brute-force search for
//! the I-projection of `P` onto `L_sensi`.

mod classify;
mod curve;
mod geometry;
mod naive_bayes;
mod oracle;
mod residual;

use thiserror::Error;

use crate::compile::CompileError;
use crate::covariation::CovariationError;
use crate::divergence::DivergenceError;
use crate::model::ModelError;

pub use classify::{classify_analysis, AnalysisClass, AnalysisKind, ComponentKind, ComponentVerdict};
pub use curve::{sensitivity_function, CurvePoint, SensitivityCurve};
pub use geometry::{h_support, index_geometry, HSet, HSupport, IndexGeometry, TouchedBlock};
pub use naive_bayes::{verify_naive_bayes_optimality, NaiveBayesReport, OracleAgreement};
pub use oracle::{i_projection_oracle, ProjectionResult, MAX_CANDIDATES, MAX_FREE_DIMENSIONS};
pub use residual::{
    pythagorean_residual, sample_l_sensi, PythagoreanReport, SLICE_TOLERANCE,
};

/// Tolerance for claims that the Pythagorean identity holds.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensitivityError {
    #[error("no parameter is varied")]
    EmptyVariation,
    #[error("parameter {} is not part of the model", .0 + 1)]
    UnknownParameter(usize),
    #[error("parameter {} is varied twice", .0 + 1)]
    DuplicateParameter(usize),
    #[error("every parameter of block {} is varied; nothing is left to covary", .0 + 1)]
    WholeBlockVaried(usize),
    #[error("the model is not weakly regular")]
    NotRegular,
    #[error("parameter {} of Q is {found}, expected {expected}; Q is not in L_sensi", .param + 1)]
    NotInSlice { param: usize, expected: f64, found: f64 },
    #[error("grid resolution {0} is too coarse; at least {1} points are required")]
    GridTooCoarse(usize, usize),
    #[error("sensitivity curves vary one or two parameters, got {0}")]
    TooManyVaried(usize),
    #[error("{dims} free covaried dimensions exceed the exhaustive-search limit of {limit}")]
    DimensionTooLarge { dims: usize, limit: usize },
    #[error("the search grid has {count} candidates, above the limit of {limit}")]
    TooManyCandidates { count: f64, limit: usize },
    #[error("parameter {} belongs to the class distribution; the classifier result covers feature parameters only", .0 + 1)]
    ClassParameter(usize),
    #[error("parameter {} belongs to the super parent; the classifier result excludes it", .0 + 1)]
    SuperParentParameter(usize),
    #[error("only naive Bayes and SPODE classifiers are covered")]
    UnsupportedStructure,
    #[error(transparent)]
    Covariation(#[from] CovariationError),
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Compile(#[from] CompileError),
}

impl SensitivityError {
    pub fn code(&self) -> &'static str {
        match self {
            SensitivityError::EmptyVariation => "EmptyVariation",
            SensitivityError::UnknownParameter(_) => "UnknownParameter",
            SensitivityError::DuplicateParameter(_) => "DuplicateParameter",
            SensitivityError::WholeBlockVaried(_) => "WholeBlockVaried",
            SensitivityError::NotRegular => "NotRegular",
            SensitivityError::NotInSlice { .. } => "NotInSlice",
            SensitivityError::GridTooCoarse(..) => "GridTooCoarse",
            SensitivityError::TooManyVaried(_) => "TooManyVaried",
            SensitivityError::DimensionTooLarge { .. } => "DimensionTooLarge",
            SensitivityError::TooManyCandidates { .. } => "TooManyCandidates",
            SensitivityError::ClassParameter(_) => "ClassParameter",
            SensitivityError::SuperParentParameter(_) => "SuperParentParameter",
            SensitivityError::UnsupportedStructure => "UnsupportedStructure",
            SensitivityError::Covariation(e) => e.code(),
            SensitivityError::Divergence(e) => e.code(),
            SensitivityError::Model(e) => e.code(),
            SensitivityError::Compile(e) => e.code(),
        }
    }
}

pub type Result<T> = std::result::Result<T, SensitivityError>;
