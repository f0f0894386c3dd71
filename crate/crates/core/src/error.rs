use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature could not reach the requested tolerance.
    #[error("quadrature did not converge: {context} (estimate {estimate}, error {error})")]
    Quadrature {
        context: String,
        estimate: f64,
        error: f64,
    },

    /// A tabulated-law file could not be parsed.
    #[error("tabulated law, line {line}: {message}")]
    TabulatedFormat { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
