use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller broke an operation's precondition (for example a missing
    /// lower-order table entry).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("Newton iteration did not converge after {iterations} iterations (residual norm {residual_norm:e})")]
    NonConvergence { iterations: usize, residual_norm: f64 },

    #[error("singular linearization: {0}")]
    Singular(String),

    #[error("eigen-solver failure: {0}")]
    Eigen(String),

    /// A model ingredient (nonlinearity, domain map, data) is not admissible.
    #[error("inadmissible input: {0}")]
    Inadmissible(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// True for failures of a numerical algorithm, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::Singular(_) | Error::Eigen(_)
        )
    }
}
