use std::fmt;

use mmsa_core::compile::CompileError;
use mmsa_core::covariation::CovariationError;
use mmsa_core::divergence::DivergenceError;
use mmsa_core::model::ModelError;
use mmsa_core::sensitivity::SensitivityError;
use serde::Serialize;

/// How a failure maps onto HTTP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    /// No model is loaded.
    NotFound,
    /// Malformed input or a model that fails validation.
    Invalid,
    /// Well-formed request outside the domain of a covariation scheme.
    Domain,
    /// The search space of the projection oracle is over its limit.
    TooLarge,
}

impl ErrorClass {
    pub fn status(self) -> u16 {
        match self {
            ErrorClass::NotFound => 404,
            ErrorClass::Invalid => 400,
            ErrorClass::Domain => 422,
            ErrorClass::TooLarge => 413,
        }
    }
}

/// An error with a stable case name, shared by the CLI and the service.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppError {
    pub class: ErrorClass,
    /// Name of the originating error case, e.g. `OrderPreservingRange`.
    pub code: String,
    pub message: String,
}

impl AppError {
    pub fn new(class: ErrorClass, code: impl Into<String>, message: impl Into<String>) -> Self {
        AppError { class, code: code.into(), message: message.into() }
    }

    pub fn invalid(code: impl Into<String>, message: impl Into<String>) -> Self {
        AppError::new(ErrorClass::Invalid, code, message)
    }

    pub fn no_model() -> Self {
        AppError::new(ErrorClass::NotFound, "NoModelLoaded", "no model is loaded")
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for AppError {}

impl From<ModelError> for AppError {
    fn from(e: ModelError) -> Self {
        AppError::invalid(e.code(), e.to_string())
    }
}

impl From<CompileError> for AppError {
    fn from(e: CompileError) -> Self {
        AppError::invalid(e.code(), e.to_string())
    }
}

impl From<CovariationError> for AppError {
    fn from(e: CovariationError) -> Self {
        let class = match e {
            CovariationError::Block { .. } => ErrorClass::Domain,
            _ => ErrorClass::Invalid,
        };
        AppError::new(class, e.code(), e.to_string())
    }
}

impl From<DivergenceError> for AppError {
    fn from(e: DivergenceError) -> Self {
        AppError::invalid(e.code(), e.to_string())
    }
}

impl From<SensitivityError> for AppError {
    fn from(e: SensitivityError) -> Self {
        match e {
            SensitivityError::Covariation(inner) => inner.into(),
            SensitivityError::DimensionTooLarge { .. } | SensitivityError::TooManyCandidates { .. } => {
                AppError::new(ErrorClass::TooLarge, e.code(), e.to_string())
            }
            _ => AppError::invalid(e.code(), e.to_string()),
        }
    }
}

impl From<serde_json::Error> for AppError {
    fn from(e: serde_json::Error) -> Self {
        AppError::invalid("InvalidJson", e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, AppError>;

#[cfg(test)]
mod tests {
    use super::*;
    use mmsa_core::covariation::{BlockError, Scheme};

    #[test]
    fn classes_follow_the_error_case() {
        let domain: AppError = CovariationError::Block {
            block: 0,
            scheme: Scheme::OrderPreserving,
            error: BlockError::LargestComponent(0.5),
        }
        .into();
        assert_eq!((domain.class.status(), domain.code.as_str()), (422, "LargestComponent"));

        let guard: AppError = SensitivityError::DimensionTooLarge { dims: 6, limit: 4 }.into();
        assert_eq!(guard.class.status(), 413);

        let nested: AppError = SensitivityError::Model(ModelError::NotMultilinear).into();
        assert_eq!((nested.class.status(), nested.code.as_str()), (400, "NotMultilinear"));
        assert_eq!(AppError::no_model().class.status(), 404);
    }
}
