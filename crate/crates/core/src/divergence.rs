//! Dissimilarity measures between distributions over one atom set.
//!
//! Natural logarithms throughout. By convention the first argument of every
//! function is the varied distribution `Q` and the second the reference `P`,
//! so [`kl_divergence`] returns `D(Q || P)`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::model::{ModelError, MonomialModel, ParameterVector, SUM_TOLERANCE};

/// Smallest coordinate a [`Distribution`] accepts.
pub const MIN_PROBABILITY: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DivergenceError {
    #[error("distributions have {0} and {1} atoms")]
    LengthMismatch(usize, usize),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("phi function `{name}` has phi(1) = {value}, expected 0")]
    PhiNotZeroAtOne { name: String, value: f64 },
    #[error("unknown metric `{0}`; expected kl, cd or phi:<name>")]
    UnknownMetric(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl DivergenceError {
    pub fn code(&self) -> &'static str {
        match self {
            DivergenceError::LengthMismatch(..) => "LengthMismatch",
            DivergenceError::InvalidDistribution(_) => "InvalidDistribution",
            DivergenceError::PhiNotZeroAtOne { .. } => "PhiNotZeroAtOne",
            DivergenceError::UnknownMetric(_) => "UnknownMetric",
            DivergenceError::Model(e) => e.code(),
        }
    }
}

pub type Result<T> = std::result::Result<T, DivergenceError>;

/// Strictly positive probabilities summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probabilities: Vec<f64>,
}

impl Distribution {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(DivergenceError::InvalidDistribution("no atoms".into()));
        }
        if let Some((i, p)) =
            probabilities.iter().enumerate().find(|(_, &p)| !(p.is_finite() && p >= MIN_PROBABILITY))
        {
            return Err(DivergenceError::InvalidDistribution(format!(
                "atom {} has probability {p}",
                i + 1
            )));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(DivergenceError::InvalidDistribution(format!("probabilities sum to {sum}")));
        }
        Ok(Distribution { probabilities })
    }

    /// Atomic probabilities of a model at `theta`.
    pub fn from_model(model: &MonomialModel, theta: &ParameterVector) -> Result<Self> {
        Distribution::new(model.distribution(theta)?)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }
}

fn same_length(q: &Distribution, p: &Distribution) -> Result<()> {
    if q.len() != p.len() {
        return Err(DivergenceError::LengthMismatch(q.len(), p.len()));
    }
    Ok(())
}

/// `D(Q || P) = sum_y Q(y) ln(Q(y) / P(y))`.
pub fn kl_divergence(q: &Distribution, p: &Distribution) -> Result<f64> {
    same_length(q, p)?;
    Ok(kl_raw(q.probabilities(), p.probabilities()))
}

/// KL on raw slices the caller has already validated.
pub(crate) fn kl_raw(q: &[f64], p: &[f64]) -> f64 {
    q.iter().zip(p).map(|(&qy, &py)| qy * (qy / py).ln()).sum()
}

/// Chan-Darwiche distance `ln max(P/Q) - ln min(P/Q)`.
pub fn cd_distance(p: &Distribution, q: &Distribution) -> Result<f64> {
    same_length(p, q)?;
    Ok(cd_raw(p.probabilities(), q.probabilities()))
}

pub(crate) fn cd_raw(p: &[f64], q: &[f64]) -> f64 {
    let (lo, hi) = p
        .iter()
        .zip(q)
        .map(|(&py, &qy)| py.ln() - qy.ln())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r), hi.max(r)));
    hi - lo
}

/// A convex function with `phi(1) = 0`.
#[derive(Clone)]
pub struct PhiFunction {
    name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl PhiFunction {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let name = name.into();
        let value = f(1.0);
        if !(value.abs() < 1e-12) {
            return Err(DivergenceError::PhiNotZeroAtOne { name, value });
        }
        Ok(PhiFunction { name, f: Arc::new(f) })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

impl fmt::Debug for PhiFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhiFunction").field("name", &self.name).finish_non_exhaustive()
    }
}

/// `sum_y P(y) phi(Q(y) / P(y))`.
pub fn phi_divergence(q: &Distribution, p: &Distribution, phi: &PhiFunction) -> Result<f64> {
    same_length(q, p)?;
    Ok(q.probabilities()
        .iter()
        .zip(p.probabilities())
        .map(|(&qy, &py)| py * phi.eval(qy / py))
        .sum())
}

/// Named phi functions. Built-ins: `kl`, `reverse_kl`, `tv`, `chi2`,
/// `hellinger`.
#[derive(Debug, Clone)]
pub struct PhiRegistry {
    functions: BTreeMap<String, PhiFunction>,
}

impl Default for PhiRegistry {
    fn default() -> Self {
        let builtins: [(&str, fn(f64) -> f64); 5] = [
            ("kl", |x| x * x.ln()),
            ("reverse_kl", |x| -x.ln()),
            ("tv", |x| (x - 1.0).abs()),
            ("chi2", |x| (x - 1.0) * (x - 1.0)),
            ("hellinger", |x| (x.sqrt() - 1.0).powi(2)),
        ];
        let mut registry = PhiRegistry { functions: BTreeMap::new() };
        for (name, f) in builtins {
            registry = registry.register(PhiFunction::new(name, f).expect("built-in phi"));
        }
        registry
    }
}

impl PhiRegistry {
    pub fn register(mut self, phi: PhiFunction) -> Self {
        self.functions.insert(phi.name.clone(), phi);
        self
    }

    pub fn get(&self, name: &str) -> Option<&PhiFunction> {
        self.functions.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.functions.keys().map(String::as_str)
    }

    /// Parses `kl`, `cd` or `phi:<name>`.
    pub fn metric(&self, text: &str) -> Result<Metric> {
        match text {
            "kl" => Ok(Metric::Kl),
            "cd" => Ok(Metric::Cd),
            _ => text
                .strip_prefix("phi:")
                .and_then(|name| self.get(name))
                .map(|phi| Metric::Phi(phi.clone()))
                .ok_or_else(|| DivergenceError::UnknownMetric(text.to_string())),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Metric {
    Kl,
    Cd,
    Phi(PhiFunction),
}

impl Metric {
    pub fn name(&self) -> String {
        match self {
            Metric::Kl => "kl".into(),
            Metric::Cd => "cd".into(),
            Metric::Phi(phi) => format!("phi:{}", phi.name()),
        }
    }

    /// Divergence of `q` from the reference `p`.
    pub fn evaluate(&self, q: &Distribution, p: &Distribution) -> Result<f64> {
        match self {
            Metric::Kl => kl_divergence(q, p),
            Metric::Cd => cd_distance(p, q),
            Metric::Phi(phi) => phi_divergence(q, p, phi),
        }
    }
}

/// Divergence of the distribution at `theta_b` from the one at `theta_a`.
pub fn divergence_between(
    model: &MonomialModel,
    theta_a: &ParameterVector,
    theta_b: &ParameterVector,
    metric: &Metric,
) -> Result<f64> {
    let p = Distribution::from_model(model, theta_a)?;
    let q = Distribution::from_model(model, theta_b)?;
    metric.evaluate(&q, &p)
}
