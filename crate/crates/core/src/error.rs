use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inputs are inconsistent (dimensions, non-Hermitian matrices, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// The rate targets cannot be met together with the radar constraints.
    #[error("infeasible scenario: {0}")]
    Infeasible(String),

    /// The conic solver failed on a subproblem.
    #[error("conic backend failure: {0}")]
    Backend(String),

    /// A covariance is not numerically rank-one.
    #[error("covariance of user {user} is not rank-one: residual ratio {ratio:.3e} exceeds {tol:.3e}")]
    RankDeficiency { user: usize, ratio: f64, tol: f64 },
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
