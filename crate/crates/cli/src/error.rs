use cjsr_core::Error;
use thiserror::Error as ThisError;

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VERIFICATION_FAILED: i32 = 1;
    pub const INPUT: i32 = 2;
    pub const INCONCLUSIVE: i32 = 3;
}

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },

    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("nondeterministic automaton: {0}")]
    Nondeterministic(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{context}: {source}")]
    Solver { context: String, source: Error },
}

impl CliError {
    /// Attaches a field or stage name to a core error, routing the input-shaped
    /// ones to their dedicated variants.
    pub fn from_core(context: &str, err: Error) -> Self {
        match err {
            Error::Nondeterministic { .. } => Self::Nondeterministic(format!("{context}: {err}")),
            Error::DimensionMismatch(_) | Error::NotSquare { .. } => Self::Dimension(format!("{context}: {err}")),
            Error::Inconclusive(_) | Error::NoFeasibleGamma | Error::DegenerateCertificate(_) => Self::Solver {
                context: context.to_string(),
                source: err,
            },
            other => Self::Invalid(format!("{context}: {other}")),
        }
    }

    /// Stable machine-readable code for the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            Self::Io { .. } => "io",
            Self::Schema { .. } => "schema",
            Self::Nondeterministic(_) => "nondeterministic",
            Self::Dimension(_) => "dimension",
            Self::Invalid(_) => "invalid",
            Self::Solver { .. } => "solver",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Solver { .. } => exit::INCONCLUSIVE,
            _ => exit::INPUT,
        }
    }
}
