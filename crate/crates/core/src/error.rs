use thiserror::Error;

/// Errors surfaced by kernel evaluation, operator application and the
/// factorization pipeline.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error(
        "quadrature did not converge: achieved {achieved:.3e}, requested {requested:.3e} \
         (partial value {value:.6e})"
    )]
    QuadratureNonConvergence {
        value: f64,
        achieved: f64,
        requested: f64,
    },

    #[error(
        "principal value did not converge: staggered extrapolants differ by {discrepancy:.3e} \
         (tolerance {tolerance:.3e})"
    )]
    PvNonConvergence {
        value: f64,
        discrepancy: f64,
        tolerance: f64,
    },

    #[error("kernel is undefined on the diagonal (x = y = {x})")]
    DiagonalEvaluation { x: f64 },

    #[error("sign certificate failed for lambda = {lambda}: {detail}")]
    CertificationFailure { lambda: f64, detail: String },

    #[error("two-bump hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("adjoint denominator degenerate: |value| = {value:.3e} below threshold {threshold:.3e}")]
    DenominatorDegeneracy { value: f64, threshold: f64 },

    #[error("symbol sample does not cover {0}")]
    SupportMismatch(String),

    #[error("residual bounds failed to decrease for two consecutive levels (last ratio {ratio:.4})")]
    DivergenceDetected { ratio: f64 },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
