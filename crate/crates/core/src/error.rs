use thiserror::Error;

/// Errors produced by the structured operators, solvers and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum OsfdeError {
    #[error("fractional order {0} outside the open interval (1, 2)")]
    InvalidOrder(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("Gohberg-Semencul pivot v1 = {0:e} is not positive")]
    NonPositivePivot(f64),

    #[error("inner Toeplitz solve stalled after {iterations} iterations (relative residual {residual:e})")]
    InnerSolverDivergence { iterations: usize, residual: f64 },

    #[error("GMRES failed at time step {step} after {iterations} iterations (relative residual {residual:e})")]
    GmresDivergence {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("diffusion coefficient {value:e} at node {index} is not strictly positive")]
    NonPositiveDiffusion { index: usize, value: f64 },

    #[error("coefficient {name} = {value:e} at node {index} is negative")]
    NegativeCoefficient {
        name: &'static str,
        index: usize,
        value: f64,
    },

    #[error("problem has no exact solution; errors and rates are unavailable")]
    MissingExactSolution,

    #[error("dense size guard exceeded: {size} unknowns (limit {limit})")]
    SizeGuard { size: usize, limit: usize },

    #[error("matrix is numerically singular (pivot column {column})")]
    Singular { column: usize },

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("energy estimate violated at step {step}: {lhs:e} > {rhs:e}")]
    StabilityViolation { step: usize, lhs: f64, rhs: f64 },
}

pub type Result<T, E = OsfdeError> = std::result::Result<T, E>;
