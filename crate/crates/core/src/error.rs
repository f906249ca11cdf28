use thiserror::Error;

/// Errors produced by the normalizing-constant, fitting and sampling routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FbError {
    /// Parameters outside the domain of the model (non-finite entries,
    /// mismatched lengths, non-SPD covariance, ...).
    #[error("parameter domain error: {0}")]
    Domain(String),

    /// Quadrature configuration violating one of the step/window inequalities.
    #[error("quadrature configuration error: {0}")]
    Config(String),

    /// The integrand produced a non-finite value at a grid node.
    #[error("non-finite integrand value at node n = {node} (t = {t})")]
    NonFinite { node: i64, t: f64 },

    /// The imaginary part of the quadrature sum is too large relative to its
    /// real part, so the result cannot be trusted.
    #[error("accuracy gate failed: imaginary residual {residual:.3e} >= {limit:.1e}")]
    Accuracy { residual: f64, limit: f64 },

    /// Closed-form oracle evaluated on (nearly) coincident coefficients.
    #[error("ill-conditioned input: {0}")]
    Conditioning(String),

    /// Input data failed validation (row index given when applicable).
    #[error("data validation error: {message}")]
    Data { row: Option<usize>, message: String },

    /// Line search could not decrease the objective.
    #[error("line search stagnated after {iterations} iterations (objective {objective})")]
    Stagnation {
        iterations: usize,
        objective: f64,
        theta: Vec<f64>,
        gamma: Vec<f64>,
    },

    /// Rejection sampler ran out of proposals.
    #[error(
        "rejection sampler accepted {accepted} of {requested} samples in {tries} proposals \
         (empirical acceptance rate {rate:.3e})"
    )]
    LowAcceptance {
        accepted: usize,
        requested: usize,
        tries: u64,
        rate: f64,
    },
}

pub type Result<T> = std::result::Result<T, FbError>;
