use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty set passed where a non-empty set is required")]
    EmptySet,

    #[error("metric mismatch: {0:?} vs {1:?}")]
    MetricMismatch(crate::msflow::Metric, crate::msflow::Metric),

    #[error("gluing gap {gap:.3e} exceeds tolerance {tol:.3e}")]
    Gluing { gap: f64, tol: f64 },

    #[error("time {tau} outside stored span [{start}, {end}]")]
    TimeRange { tau: f64, start: f64, end: f64 },

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("backward completion stopped at depth {depth}, span {span:.4} reached")]
    PartialCompletion { depth: usize, span: f64 },

    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),

    #[error("grid mismatch: expected {expected} values, got {got}")]
    GridMismatch { expected: usize, got: usize },

    #[error("basis mismatch between fields ({0} vs {1} modes)")]
    BasisMismatch(usize, usize),

    #[error("blow-up at t = {time}: mode {mode} is not finite")]
    BlowUp { time: f64, mode: usize },

    #[error("unknown nonlinearity `{0}`")]
    UnknownNonlinearity(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("certification failed: {inequality} violated at u = {at} (slack {slack:.3e})")]
    Certification {
        inequality: &'static str,
        at: f64,
        slack: f64,
    },

    #[error("Newton failed after {iterations} iterations, residual {residual:.3e}")]
    NewtonFailure {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
        last: Vec<f64>,
    },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("resonant k = {k}: sqrt(k) equals eigenvalue {eigenvalue}; nearest safe k is {suggestion}")]
    Resonant { k: u64, eigenvalue: f64, suggestion: u64 },

    #[error("unresolved omega-limit: terminal distance {distance:.3e}, energy drift {drift:.3e}")]
    UnresolvedLimit { distance: f64, drift: f64 },

    #[error("dissipativity failure: {0}")]
    Dissipativity(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
