use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed config, bad flag value or CSV schema violation.
    #[error("{0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A design constraint failed after outputs were written.
    #[error("constraint failed: {0}")]
    Constraint(String),

    #[error(transparent)]
    Model(#[from] scmref::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// 0 success, 1 domain or constraint, 2 convergence, 3 config or schema.
    pub fn exit_code(&self) -> i32 {
        use scmref::Error as E;
        match self {
            CliError::Config(_) | CliError::Io { .. } => 3,
            CliError::Constraint(_) => 1,
            CliError::Model(e) => match e {
                E::Input(_) => 3,
                E::Convergence { .. } | E::Unsolvable { .. } => 2,
                E::Domain(_) | E::NoSolution(_) | E::Sizing { .. } => 1,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
