//! Operations shared by the command line and the HTTP service.
//!
//! Each takes a loaded [`Session`] and a request in the JSON shape the
//! service accepts, and returns a serialisable response.

use std::collections::BTreeMap;

use mmsa_core::covariation::{covary as covary_theta, order_frame, Scheme};
use mmsa_core::divergence::{divergence_between, PhiRegistry};
use mmsa_core::model::Regularity;
use mmsa_core::sensitivity::{
    classify_analysis, i_projection_oracle, index_geometry, pythagorean_residual, sample_l_sensi,
    sensitivity_function, verify_naive_bayes_optimality, AnalysisKind, ComponentVerdict,
    NaiveBayesReport, ProjectionResult, SensitivityCurve, SensitivityError, RESIDUAL_TOLERANCE,
};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::csv;
use crate::error::{AppError, ErrorClass, Result};
use crate::formats::{parse_model, to_raw_model, RawModelFile};
use crate::session::{SchemeField, Session, SourceKind};

pub const DEFAULT_GRID: usize = 99;
pub const GRID_ENV: &str = "MMSA_GRID_DEFAULT";

/// Settings shared by every request.
#[derive(Debug, Clone)]
pub struct Context {
    pub phi: PhiRegistry,
    pub grid_default: usize,
}

impl Default for Context {
    fn default() -> Self {
        Context { phi: PhiRegistry::default(), grid_default: DEFAULT_GRID }
    }
}

impl Context {
    /// Reads the default grid resolution from `MMSA_GRID_DEFAULT`.
    pub fn from_env() -> Result<Self> {
        let grid_default = match std::env::var(GRID_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| {
                AppError::invalid("InvalidGrid", format!("{GRID_ENV}=`{v}` is not a positive integer"))
            })?,
            Err(_) => DEFAULT_GRID,
        };
        Ok(Context { grid_default, ..Context::default() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterInfo {
    pub index: usize,
    pub label: String,
    pub alias: String,
    pub block: usize,
    pub value: f64,
    /// Exclusive upper bound for an order-preserving target; absent when no
    /// component of the block is strictly larger.
    pub order_preserving_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableInfo {
    pub name: String,
    pub states: Vec<String>,
}

/// What `GET /api/model` returns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSummary {
    pub name: Option<String>,
    pub source: SourceKind,
    pub n_atoms: usize,
    pub n_params: usize,
    pub atoms: Vec<String>,
    pub parameters: Vec<ParameterInfo>,
    pub partition: Vec<Vec<usize>>,
    /// Variables usable in events such as `Y3=3`.
    pub variables: Vec<VariableInfo>,
    pub multilinear: bool,
    pub regular_strict: bool,
    pub regular_weak: bool,
    /// Grid resolution used when a request gives none.
    pub grid_default: usize,
}

fn parameters(session: &Session) -> Vec<ParameterInfo> {
    let partition = session.model().partition();
    let theta = session.theta();
    (0..theta.len())
        .map(|j| {
            let block = partition.block_of(j);
            let members = partition.block(block);
            let values: Vec<f64> = members.iter().map(|&k| theta.values()[k]).collect();
            let local = members.iter().position(|&k| k == j).unwrap_or(0);
            ParameterInfo {
                index: j,
                label: theta.labels()[j].clone(),
                alias: session.compiled.aliases[j].clone(),
                block,
                value: theta.values()[j],
                order_preserving_max: order_frame(&values, local).ok().map(|f| f.theta_max),
            }
        })
        .collect()
}

pub fn summary(session: &Session, ctx: &Context) -> ModelSummary {
    let model = session.model();
    let partition = model.partition();
    ModelSummary {
        name: session.name.clone(),
        source: session.source,
        n_atoms: model.n_atoms(),
        n_params: model.n_params(),
        atoms: model.atom_labels().to_vec(),
        parameters: parameters(session),
        partition: partition.blocks().to_vec(),
        variables: session
            .compiled
            .layout
            .variables
            .iter()
            .map(|v| VariableInfo { name: v.name.clone(), states: v.states.clone() })
            .collect(),
        multilinear: model.is_multilinear(),
        regular_strict: model.is_regular(Regularity::Strict).unwrap_or(false),
        regular_weak: model.is_regular(Regularity::Weak).unwrap_or(false),
        grid_default: ctx.grid_default,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Problem {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationOutcome {
    /// Valid parameters, multilinear and weakly regular.
    pub clean: bool,
    pub source: Option<SourceKind>,
    pub problems: Vec<Problem>,
    pub multilinear: Option<bool>,
    pub regular_strict: Option<bool>,
    pub regular_weak: Option<bool>,
}

/// Loads, validates and checks a model document. Load failures are
/// reported as problems, not errors.
pub fn validate(value: &Value) -> ValidationOutcome {
    let session = match parse_model(value) {
        Ok(s) => s,
        Err(e) => {
            return ValidationOutcome {
                clean: false,
                source: crate::formats::detect_format(value).ok(),
                problems: vec![Problem { code: e.code, message: e.message }],
                multilinear: None,
                regular_strict: None,
                regular_weak: None,
            }
        }
    };
    let model = session.model();
    let report = model.validate(session.theta());
    let mut problems: Vec<Problem> = report
        .violations
        .iter()
        .map(|v| Problem { code: violation_code(v).into(), message: v.to_string() })
        .collect();
    let multilinear = model.is_multilinear();
    if !multilinear {
        problems.push(Problem { code: "NotMultilinear".into(), message: "model is not multilinear".into() });
    }
    let regular_weak = model.is_regular(Regularity::Weak).unwrap_or(false);
    if multilinear && !regular_weak {
        problems.push(Problem {
            code: "NotRegular".into(),
            message: "some row uses two parameters of one block".into(),
        });
    }
    ValidationOutcome {
        clean: problems.is_empty(),
        source: Some(session.source),
        problems,
        multilinear: Some(multilinear),
        regular_strict: Some(model.is_regular(Regularity::Strict).unwrap_or(false)),
        regular_weak: Some(regular_weak),
    }
}

fn violation_code(v: &mmsa_core::model::Violation) -> &'static str {
    use mmsa_core::model::Violation::*;
    match v {
        LengthMismatch { .. } => "LengthMismatch",
        NonFinite { .. } => "NonFinite",
        NonPositive { .. } => "NonPositive",
        NotBelowOne { .. } => "NotBelowOne",
        BlockSum { .. } => "BlockSum",
        TotalProbability { .. } => "TotalProbability",
    }
}

/// The compiled model in the raw layout.
pub fn compile(session: &Session) -> RawModelFile {
    to_raw_model(&session.compiled)
}

pub fn compile_csv(session: &Session) -> String {
    csv::table(
        &["index", "label", "alias", "block", "value"],
        parameters(session).iter().map(|p| {
            vec![
                p.index.to_string(),
                p.label.to_string(),
                p.alias.to_string(),
                p.block.to_string(),
                csv::number(p.value),
            ]
        }),
    )
}

/// `{"vary": {key: target}, "scheme": ...}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VaryRequest {
    pub vary: BTreeMap<String, f64>,
    #[serde(default)]
    pub scheme: SchemeField,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovaryResponse {
    pub labels: Vec<String>,
    pub theta_old: Vec<f64>,
    pub theta_new: Vec<f64>,
    pub touched_blocks: Vec<usize>,
    pub scale_factors: Vec<Option<f64>>,
    pub warnings: Vec<String>,
}

pub fn covary(session: &Session, req: &VaryRequest) -> Result<CovaryResponse> {
    let mut warnings = Vec::new();
    let spec = session.variation(&req.vary, &req.scheme, &mut warnings)?;
    let result = covary_theta(session.model(), session.theta(), &spec)?;
    Ok(CovaryResponse {
        labels: session.theta().labels().to_vec(),
        theta_old: session.theta().values().to_vec(),
        theta_new: result.theta_new.values().to_vec(),
        touched_blocks: result.touched_blocks,
        scale_factors: result.scale_factors,
        warnings,
    })
}

pub fn covary_csv(r: &CovaryResponse) -> String {
    csv::table(
        &["index", "label", "theta_old", "theta_new"],
        (0..r.labels.len()).map(|j| {
            vec![j.to_string(), r.labels[j].to_string(), csv::number(r.theta_old[j]), csv::number(r.theta_new[j])]
        }),
    )
}

/// Event probability, optionally after a variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbRequest {
    pub event: String,
    #[serde(default)]
    pub vary: BTreeMap<String, f64>,
    #[serde(default)]
    pub scheme: SchemeField,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbResponse {
    pub event: String,
    pub atoms: Vec<usize>,
    pub probability: f64,
    pub warnings: Vec<String>,
}

pub fn prob(session: &Session, req: &ProbRequest) -> Result<ProbResponse> {
    let event = session.event(&req.event)?;
    let mut warnings = Vec::new();
    let theta = if req.vary.is_empty() {
        session.theta().clone()
    } else {
        let spec = session.variation(&req.vary, &req.scheme, &mut warnings)?;
        covary_theta(session.model(), session.theta(), &spec)?.theta_new
    };
    Ok(ProbResponse {
        event: req.event.clone(),
        atoms: event.atoms().to_vec(),
        probability: session.model().event_probability(&theta, &event)?,
        warnings,
    })
}

pub fn prob_csv(r: &ProbResponse) -> String {
    csv::table(&["event", "probability"], [vec![r.event.to_string(), csv::number(r.probability)]])
}

fn default_schemes() -> Vec<Scheme> {
    vec![Scheme::Proportional, Scheme::Uniform, Scheme::OrderPreserving]
}

/// One curve per scheme for one or two parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRequest {
    pub vary: Vec<String>,
    pub event: String,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    #[serde(default)]
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityResponse {
    pub event: String,
    /// The keys as given, used as column names.
    pub params: Vec<String>,
    pub curves: Vec<SensitivityCurve>,
    pub warnings: Vec<String>,
}

pub fn sensitivity(session: &Session, req: &SensitivityRequest, ctx: &Context) -> Result<SensitivityResponse> {
    let mut warnings = Vec::new();
    let params = session.resolve_params(req.vary.iter().map(String::as_str), &mut warnings)?;
    let event = session.event(&req.event)?;
    if req.schemes.is_empty() {
        return Err(AppError::invalid("NoScheme", "at least one scheme is required"));
    }
    let grid = req.grid.unwrap_or(ctx.grid_default);
    let curves = req
        .schemes
        .iter()
        .map(|&s| sensitivity_function(session.model(), session.theta(), &params, s, &event, grid))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(SensitivityResponse { event: req.event.clone(), params: req.vary.clone(), curves, warnings })
}

/// Columns: grid value(s), scheme, probability, kl, cd. Points where a
/// scheme is undefined have empty value fields.
pub fn sensitivity_csv(r: &SensitivityResponse) -> String {
    let mut header: Vec<&str> = r.params.iter().map(String::as_str).collect();
    header.extend(["scheme", "probability", "kl", "cd"]);
    csv::table(
        &header,
        r.curves.iter().flat_map(|c| {
            c.points.iter().map(move |p| {
                let mut row: Vec<String> = p.targets.iter().map(|&t| csv::number(t)).collect();
                row.push(c.scheme.name().into());
                row.push(csv::optional(p.probability));
                row.push(csv::optional(p.kl));
                row.push(csv::optional(p.cd));
                row
            })
        }),
    )
}

fn default_metrics() -> Vec<String> {
    vec!["kl".into(), "cd".into()]
}

/// Divergences of a second parameter vector from the model's, the second
/// given directly or by a variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceRequest {
    #[serde(default = "default_metrics")]
    pub metrics: Vec<String>,
    #[serde(default)]
    pub theta_a: Option<Vec<f64>>,
    #[serde(default)]
    pub theta_b: Option<Vec<f64>>,
    #[serde(default)]
    pub vary: BTreeMap<String, f64>,
    #[serde(default)]
    pub scheme: SchemeField,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricValue {
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceResponse {
    pub values: Vec<MetricValue>,
    pub theta_b: Vec<f64>,
    pub warnings: Vec<String>,
}

pub fn divergence(session: &Session, req: &DivergenceRequest, ctx: &Context) -> Result<DivergenceResponse> {
    let mut warnings = Vec::new();
    let base = session.theta();
    let theta_a = match &req.theta_a {
        Some(v) => base.with_values(v.clone())?,
        None => base.clone(),
    };
    let theta_b = match (&req.theta_b, req.vary.is_empty()) {
        (Some(v), true) => base.with_values(v.clone())?,
        (None, false) => {
            let spec = session.variation(&req.vary, &req.scheme, &mut warnings)?;
            covary_theta(session.model(), &theta_a, &spec)?.theta_new
        }
        _ => {
            return Err(AppError::invalid(
                "MissingComparison",
                "give exactly one of theta_b or vary",
            ))
        }
    };
    let values = req
        .metrics
        .iter()
        .map(|name| {
            let metric = ctx.phi.metric(name)?;
            Ok(MetricValue {
                metric: metric.name(),
                value: divergence_between(session.model(), &theta_a, &theta_b, &metric)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DivergenceResponse { values, theta_b: theta_b.values().to_vec(), warnings })
}

pub fn divergence_csv(r: &DivergenceResponse) -> String {
    csv::table(
        &["metric", "value"],
        r.values.iter().map(|m| vec![m.metric.to_string(), csv::number(m.value)]),
    )
}

fn default_samples() -> usize {
    20
}

/// Classification, residual sampling and the optional oracle for one set of
/// targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeRequest {
    pub vary: BTreeMap<String, f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// `true` requires the oracle, `false` skips it; absent runs it when the
    /// search space is small enough.
    #[serde(default)]
    pub oracle: Option<bool>,
    #[serde(default)]
    pub grid: Option<usize>,
    /// Adds a proportional sensitivity curve for this event.
    #[serde(default)]
    pub event: Option<String>,
}

impl AnalyzeRequest {
    pub fn new(vary: BTreeMap<String, f64>) -> Self {
        AnalyzeRequest { vary, samples: default_samples(), seed: 0, oracle: None, grid: None, event: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualStats {
    pub samples: usize,
    pub seed: u64,
    pub max_abs_residual: f64,
    pub max_abs_gap: f64,
    /// Largest `|residual - gap|`.
    pub max_discrepancy: f64,
    pub identity_holds: bool,
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub kind: AnalysisKind,
    pub pattern: AnalysisKind,
    pub components: Vec<ComponentVerdict>,
    pub h_sets: Vec<Vec<usize>>,
    pub identity_certified: bool,
    pub certification_gap: f64,
    pub residual: ResidualStats,
    pub projection: Option<ProjectionResult>,
    pub naive_bayes: Option<NaiveBayesReport>,
    pub curve: Option<SensitivityCurve>,
    /// Whether proportional covariation is the I-projection: the oracle's
    /// answer when it ran, otherwise the sampled identity check.
    pub proportional_optimal: bool,
    pub notes: Vec<String>,
    pub warnings: Vec<String>,
}

impl AnalysisReport {
    /// One-line verdict for terminals.
    pub fn verdict(&self) -> String {
        let mut line = format!(
            "kind={} residual_max={:.3e} identity={}",
            self.kind.name(),
            self.residual.max_abs_residual,
            if self.residual.identity_holds { "holds" } else { "fails" }
        );
        if let Some(p) = &self.projection {
            line.push_str(&format!(
                " matches_proportional={} min_kl={:.6e} proportional_kl={:.6e}",
                p.matches_proportional, p.min_kl, p.proportional_kl
            ));
        }
        line.push_str(&format!(" proportional_optimal={}", self.proportional_optimal));
        line
    }
}

pub fn analyze(session: &Session, req: &AnalyzeRequest, ctx: &Context) -> Result<AnalysisReport> {
    let mut warnings = Vec::new();
    let targets = session.targets(&req.vary, &mut warnings)?;
    let varied: Vec<usize> = targets.keys().copied().collect();
    let model = session.model();
    let theta = session.theta();
    let class = classify_analysis(model, &varied)?;
    let mut notes = class.notes.clone();

    let geometry = index_geometry(model, &varied)?;
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let mut residuals = Vec::with_capacity(req.samples);
    let (mut max_gap, mut max_discrepancy) = (0.0f64, 0.0f64);
    for _ in 0..req.samples {
        let q = theta.with_values(sample_l_sensi(&geometry, theta.values(), &targets, &mut rng))?;
        let r = pythagorean_residual(model, theta, &targets, &q)?;
        max_gap = max_gap.max(r.gap.abs());
        max_discrepancy = max_discrepancy.max((r.residual - r.gap).abs());
        residuals.push(r.residual);
    }
    let residual = ResidualStats {
        samples: req.samples,
        seed: req.seed,
        max_abs_residual: residuals.iter().fold(0.0, |m, r| m.max(r.abs())),
        max_abs_gap: max_gap,
        max_discrepancy,
        identity_holds: max_gap < RESIDUAL_TOLERANCE,
        residuals,
    };

    let grid = req.grid.unwrap_or(ctx.grid_default);
    let projection = match req.oracle {
        Some(false) => None,
        Some(true) => Some(i_projection_oracle(model, theta, &targets, grid)?),
        None => match i_projection_oracle(model, theta, &targets, grid) {
            Ok(p) => Some(p),
            Err(e @ (SensitivityError::DimensionTooLarge { .. } | SensitivityError::TooManyCandidates { .. })) => {
                notes.push(format!("oracle skipped: {e}"));
                None
            }
            Err(e) => return Err(e.into()),
        },
    };

    let naive_bayes = match &session.classifier {
        Some(spec) => match verify_naive_bayes_optimality(spec, &targets, req.samples, req.seed, None) {
            Ok(r) => Some(r),
            Err(e) => {
                notes.push(format!("classifier check not applicable: {e}"));
                None
            }
        },
        None => None,
    };

    let curve = match &req.event {
        Some(text) => {
            let event = session.event(text)?;
            let params: Vec<usize> = varied.iter().copied().take(2).collect();
            if varied.len() > 2 {
                notes.push("curve drawn for the first two varied parameters".into());
            }
            Some(sensitivity_function(model, theta, &params, Scheme::Proportional, &event, grid)?)
        }
        None => None,
    };

    let proportional_optimal = match &projection {
        Some(p) => p.matches_proportional,
        None => residual.identity_holds,
    };
    Ok(AnalysisReport {
        kind: class.kind,
        pattern: class.pattern,
        components: class.components,
        h_sets: class.h_sets,
        identity_certified: class.identity_certified,
        certification_gap: class.certification_gap,
        residual,
        projection,
        naive_bayes,
        curve,
        proportional_optimal,
        notes,
        warnings,
    })
}

/// Grid search for the I-projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectRequest {
    pub vary: BTreeMap<String, f64>,
    #[serde(default)]
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectResponse {
    #[serde(flatten)]
    pub result: ProjectionResult,
    pub warnings: Vec<String>,
}

pub fn project(session: &Session, req: &ProjectRequest, ctx: &Context) -> Result<ProjectResponse> {
    let mut warnings = Vec::new();
    let targets = session.targets(&req.vary, &mut warnings)?;
    let grid = req.grid.unwrap_or(ctx.grid_default);
    let result = i_projection_oracle(session.model(), session.theta(), &targets, grid)?;
    Ok(ProjectResponse { result, warnings })
}

/// Rejects CSV for responses that are not tables.
pub fn csv_unavailable(command: &str) -> AppError {
    AppError::new(
        ErrorClass::Invalid,
        "CsvUnavailable",
        format!("`{command}` has no tabular output; use --format json"),
    )
}
