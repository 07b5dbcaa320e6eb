use thiserror::Error;

/// Errors raised by the numerical engine.
///
/// Variants are grouped by how a caller is expected to react: domain and
/// phase errors mean the inputs sit outside the formula's validity, resource
/// and truncation errors mean a bigger budget might help, and numerical
/// errors mean an algorithm failed to deliver its contract.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("resource limit: matrix dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("truncation failed to converge: {0}")]
    Truncation(String),

    #[error("no sign change in bracket [{lo}, {hi}] (f(lo) = {f_lo:e}, f(hi) = {f_hi:e})")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("root solver stalled after {iterations} iterations (residual {residual:e})")]
    RootNotConverged { iterations: usize, residual: f64 },

    #[error("eigensolver did not converge for a {dim}x{dim} matrix (max |entry| = {max_abs:e})")]
    Eigen { dim: usize, max_abs: f64 },

    #[error("quadrature did not reach tolerance: estimate {estimate:e}, error {error:e} after {intervals} subintervals")]
    Quadrature { estimate: f64, error: f64, intervals: usize },

    #[error("degenerate J_z variance {variance:e} (threshold {threshold:e})")]
    DegenerateVariance { variance: f64, threshold: f64 },

    #[error("wrong phase: {0}")]
    Phase(String),

    #[error("flat direction at the saddle point: |Phi''(z0)| = {0:e}")]
    FlatSaddle(f64),

    #[error("consistency check failed: {0}")]
    Consistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
