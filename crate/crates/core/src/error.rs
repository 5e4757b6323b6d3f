use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("state has weight {weight:.3e} in the top two Fock levels")]
    TruncationLeak { weight: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("positivity lost at step {step}: min eigenvalue below -1e-6")]
    PositivityLoss { step: usize },
    #[error("costate gauge violated: <sigma> = {value}")]
    GaugeViolation { value: f64 },
    #[error("closed scalar system requires lambda2 = 0 (got {lambda2})")]
    AnharmonicNotClosed { lambda2: f64 },
    #[error("covariances are not pure: q3*q5 - q4^2 = {purity}")]
    NonPureInput { purity: f64 },
    #[error("boundary matrix is singular (condition number {cond:.3e})")]
    SingularMatrix { cond: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
