use thiserror::Error;

/// Errors raised by the geometry, solver, diagnostic and reconstruction layers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("observation point {x0:?} lies in the closed domain")]
    X0InsideDomain { x0: Vec<f64> },

    #[error("observation time T={t} does not exceed the critical time {critical}")]
    TimeBelowCritical { t: f64, critical: f64 },

    #[error("no profile exponent places the maximiser of d inside omega={omega:?}")]
    NoValidExponent { omega: (f64, f64) },

    #[error("omega={omega:?} is not contained in the extension region {extension:?}")]
    OmegaOutsideExtension {
        omega: (f64, f64),
        extension: (f64, f64),
    },

    #[error("unsupported observation boundary: {0}")]
    UnsupportedGamma(String),

    #[error("invalid subdomain: {0}")]
    InvalidSubdomain(String),

    #[error("weight kind mismatch: expected {expected}, found {found}")]
    KindMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("time t={t} outside the open interval (0, {horizon})")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("parameter conflict: {0}")]
    ParameterConflict(String),

    #[error("time step dt={dt} violates the CFL limit {limit}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("solution became non-finite at time step {step}")]
    UnstableSolution { step: usize },

    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),

    #[error("field does not vanish at t=0 (max |y(.,0)| = {norm:e})")]
    NonzeroTrace { norm: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("observation boundary is empty")]
    EmptyGamma,

    #[error("discretisation residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("field does not vanish on the boundary (max |v| = {max:e})")]
    BoundaryViolation { max: f64 },

    #[error("condition violated: {0}")]
    ConditionViolation(String),

    #[error("fit needs at least {required} points, got {points}")]
    FitUnderdetermined { points: usize, required: usize },

    #[error("no admissible beta: {0}")]
    NoAdmissibleBeta(String),

    #[error("no convergence after {iterations} iterations (relative residual {residual:e})")]
    MaxIterationsExceeded { iterations: usize, residual: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("expression error: {0}")]
    Expression(String),
}

pub type Result<T> = std::result::Result<T, Error>;
