use thiserror::Error;

use crate::metric::TangentPoint;

/// Errors produced by the geometry engine.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("domain error: {op} evaluated at {value}")]
    Domain { op: &'static str, value: f64 },

    #[error("point lies outside the chart of metric `{metric}`")]
    OutsideChart { metric: String },

    #[error("finite-difference step {step:e} is below the 1e-10 floor")]
    StepUnderflow { step: f64 },

    #[error("metric is not strongly convex: min eigenvalue {min_eigenvalue:e} at {witness:?}")]
    NonConvex {
        min_eigenvalue: f64,
        witness: TangentPoint,
    },

    #[error("(alpha,beta) regularity violated at s = {s} (b0 = {b0})")]
    RegularityViolation { s: f64, b0: f64 },

    #[error("volume quadrature error estimate {estimate:e} exceeds 1e-8")]
    QuadratureFailure { estimate: f64 },

    #[error("jet and finite-difference engines disagree on {quantity}: {jet} vs {fd}")]
    EngineDisagreement {
        quantity: String,
        jet: f64,
        fd: f64,
    },

    #[error("operation requires dimension {expected}, metric has dimension {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("degenerate fit: {0}")]
    FitDegenerate(String),

    #[error("phi profile is of Randers type (c1 = {c1}, c2 = {c2}, c3 = {c3})")]
    RandersTypeInput { c1: f64, c2: f64, c3: f64 },

    #[error("chart radius {requested} exceeds the exponential-chart validity radius {limit}")]
    ChartTooLarge { requested: f64, limit: f64 },

    #[error("geodesic integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },

    #[error("invalid Lie algebra data: {0}")]
    InvalidLieAlgebra(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("expression error: {0}")]
    Expr(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
