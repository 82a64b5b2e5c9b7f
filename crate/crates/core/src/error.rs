use thiserror::Error;

/// Errors surfaced by the toolkit.
///
/// Numerical routines validate their inputs up front (hermiticity, trace,
/// positivity, commutation) so that downstream spectral arguments are on
/// solid ground; anything that fails those checks is reported here rather
/// than silently producing a meaningless bound.
#[derive(Debug, Error)]
pub enum Error {
    /// Input fails a structural precondition (non-Hermitian matrix,
    /// populations not summing to one, overlapping clusters, ...).
    #[error("validation: {0}")]
    Validation(String),

    /// Shapes or subsystem dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Mathematical domain violation (negative level for a fractional
    /// power, relative entropy outside the support, ...).
    #[error("domain: {0}")]
    Domain(String),

    /// A numerical routine lost too much precision to certify the result.
    #[error("numerical: {0}")]
    Numerical(String),

    /// Setup file could not be parsed or fails schema validation.
    #[error("setup parse: {0}")]
    Parse(String),

    /// Scenario name not in the registry.
    #[error("unknown scenario: {0}")]
    UnknownScenario(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
