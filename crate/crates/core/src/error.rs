use thiserror::Error;

/// Errors raised by the models and analyses.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the equation being evaluated.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested voltage cannot be produced by any positive inversion level.
    #[error("no solution: {0}")]
    NoSolution(String),

    /// An iterative solver hit its iteration cap or lost its bracket.
    #[error("convergence failure after {iterations} iterations: {what}")]
    Convergence { what: String, iterations: usize },

    /// Malformed or inconsistent input data.
    #[error("invalid input: {0}")]
    Input(String),

    /// The bias point could not be solved at a given temperature.
    #[error("unsolvable bias point at T = {temperature_c:.2} degC: {reason}")]
    Unsolvable { temperature_c: f64, reason: String },

    /// A sizing step failed.
    #[error("sizing step ({step}) failed: {reason}")]
    Sizing { step: &'static str, reason: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
