use thiserror::Error;

/// Errors produced by the library.
///
/// Variants split into two groups: input validation problems (bad
/// parameters, unsupported combinations) and numerical failures (factorization
/// breakdown, solver divergence, series truncation). The CLI maps the first
/// group to exit code 1 and the second to exit code 2.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SmprError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("moment order {requested} exceeds the supported maximum {max}")]
    OrderTooHigh { requested: usize, max: usize },

    #[error("{family} has no {what}")]
    Unsupported { family: &'static str, what: String },

    #[error("degenerate marginal: {0}")]
    Degenerate(String),

    #[error("index {index} out of range (max {max})")]
    OutOfRange { index: usize, max: usize },

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("Cholesky breakdown at order {order}: pivot {pivot:e} is not positive")]
    CholeskyBreakdown { order: usize, pivot: f64 },

    #[error("Newton iteration failed: {0}")]
    NoConvergence(String),

    #[error("no positive solution: {0}")]
    NoPositiveSolution(String),

    #[error("series truncation tolerance {tolerance:e} unreachable within {terms} terms (achievable bound {bound:e})")]
    Truncation { tolerance: f64, terms: usize, bound: f64 },

    #[error("clipped negative mass {clipped:e} exceeds the allowed {allowed:e} (y = {y}, t = {t})")]
    NegativeMass { clipped: f64, allowed: f64, y: f64, t: f64 },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("sampler failed on path {path}, step {step}: {source}")]
    Path { path: usize, step: usize, source: Box<SmprError> },
}

impl SmprError {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            SmprError::CholeskyBreakdown { .. }
            | SmprError::NoConvergence(_)
            | SmprError::NoPositiveSolution(_)
            | SmprError::Truncation { .. }
            | SmprError::NegativeMass { .. }
            | SmprError::InsufficientSamples(_) => true,
            SmprError::Path { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, SmprError>;
