use thiserror::Error;

/// Errors surfaced by the simulation, regression and pricing layers.
#[derive(Debug, Error)]
pub enum Error {
    /// The correlation triple does not define a positive definite matrix.
    #[error("correlation matrix not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    DomainError(String),

    /// Two inputs that must share a grid or length disagree.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// The regression design matrix is rank deficient (degenerate sample).
    #[error("rank deficient design: {0}")]
    RankDeficient(String),

    /// The simulation budget is inconsistent (e.g. N > K).
    #[error("invalid budget: {0}")]
    InvalidBudget(String),

    /// The ODE solution exceeded the overflow guard before the horizon.
    #[error("nonconvergence: {0}")]
    Nonconvergence(String),

    /// No implied volatility reproduces the given price.
    #[error("no solution: {0}")]
    NoSolution(String),

    /// Inconsistent or unsupported configuration.
    #[error("config error: {0}")]
    ConfigError(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable name of the variant, used for process exit reporting.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotPositiveDefinite(_) => "NotPositiveDefinite",
            Error::DomainError(_) => "DomainError",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::RankDeficient(_) => "RankDeficient",
            Error::InvalidBudget(_) => "InvalidBudget",
            Error::Nonconvergence(_) => "Nonconvergence",
            Error::NoSolution(_) => "NoSolution",
            Error::ConfigError(_) => "ConfigError",
        }
    }
}
