use thiserror::Error;

pub type Result<T> = std::result::Result<T, AoiError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AoiError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The covariance series only converges for |θ| < 1.
    #[error("divergent series: |theta| = {theta_abs} must be < 1")]
    DivergentSeries { theta_abs: f64 },

    /// λ ∈ {0, 1}: the success process is constant and AoI moments are not finite
    /// (or trivially 1 for the passive process at λ = 0).
    #[error("degenerate chain: lambda = {lambda} makes the success process constant")]
    Degenerate { lambda: f64 },

    #[error("series did not reach tolerance {tolerance:e} within {max_terms} terms")]
    NotConverged { tolerance: f64, max_terms: usize },

    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),
}

impl AoiError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        AoiError::InvalidParameter(msg.into())
    }

    /// Process exit code used by the CLI and the C status codes.
    pub fn exit_code(&self) -> i32 {
        match self {
            AoiError::InvalidParameter(_) => 2,
            AoiError::DivergentSeries { .. }
            | AoiError::Degenerate { .. }
            | AoiError::NotConverged { .. } => 3,
            AoiError::InternalInconsistency(_) => 4,
        }
    }
}
