use thiserror::Error;

#[derive(Debug, Error)]
pub enum EslnError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid value for `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error(
        "frequency quadrature for {table} did not converge: residual {residual:.3e} > tolerance {tolerance:.1e} after {refinements} refinements"
    )]
    QuadratureNotConverged {
        table: &'static str,
        residual: f64,
        tolerance: f64,
        refinements: usize,
    },

    #[error("spectrum of {filter} is negative at bin {bin}: {value:.3e} (max {max:.3e})")]
    NegativeSpectrum {
        filter: &'static str,
        bin: usize,
        value: f64,
        max: f64,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("asymptote window: {0}")]
    Window(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl EslnError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Self::Domain(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::InvalidConfig {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = EslnError> = std::result::Result<T, E>;
