use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The parameters hit an excluded point (for instance `J = ±J0`).
    #[error("singular parameters: {0}")]
    SingularParameter(String),

    #[error("unsupported tree order k = {0}; model operators require k = 2")]
    UnsupportedOrder(usize),

    /// A numerically extracted quantity does not have the structure the model predicts.
    #[error("model inconsistency: {what} (residual {residual:.3e})")]
    ModelInconsistency { what: String, residual: f64 },

    /// The algebraic ordered roots exist but the boundary matrices are indefinite.
    #[error("ordered solution is not positive: xi0 = {xi0}, xi3 = {xi3}")]
    SolutionNotPositive { xi0: f64, xi3: f64 },

    #[error("no ordered phase: delta = {delta}")]
    NoOrderedPhase { delta: f64 },

    /// A dense construction would exceed the configured size guard.
    #[error("resource guard: {0}")]
    Resource(String),

    #[error("malformed input: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
