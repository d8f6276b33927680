use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A configuration field violates a parameter constraint.
    #[error("invalid config: {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    /// U <= 0: both hypotheses share one distribution, no threshold separates them.
    #[error("degenerate detection scales: U = {u} (must be > 0)")]
    DegenerateScales { u: f64 },

    #[error("threshold quadratic has no real root (discriminant {discriminant})")]
    NoRealRoot { discriminant: f64 },

    #[error("Q-function approximation is defined for x >= 0, got {0}")]
    Domain(f64),

    #[error("sweep axis is empty")]
    EmptyAxis,
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field,
            reason: reason.into(),
        }
    }
}
