use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A model, prior, decoder or dimension combination that is not supported.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An iterative routine stopped before meeting its tolerance.
    #[error("{what} did not converge (achieved error {achieved:.3e})")]
    NonConvergence { what: String, achieved: f64 },

    /// A size guard refused to run an exponential-cost computation.
    #[error("guard refusal: {0}")]
    Guard(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}
