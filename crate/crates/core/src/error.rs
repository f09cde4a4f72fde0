use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite entry in {0}")]
    NonFinite(String),

    #[error("label {label} out of range 1..={num_labels}")]
    LabelOutOfRange { label: usize, num_labels: usize },

    #[error("state {state} out of range 1..={num_states}")]
    StateOutOfRange { state: usize, num_states: usize },

    #[error("nondeterministic automaton: state {state} has several transitions on label {label}")]
    Nondeterministic { state: usize, label: usize },

    #[error("invalid transition structure matrix: {0}")]
    InvalidTsm(String),

    #[error("empty word")]
    EmptyWord,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("enumeration of {words} words exceeds the cap of {cap}; use the Gripenberg bounds instead")]
    EnumerationCap { words: u128, cap: u128 },

    #[error("degenerate matrix set: {0}")]
    Degenerate(String),

    #[error("semidefinite solver inconclusive: {0}")]
    Inconclusive(String),

    #[error("no feasible gamma above zero for the dual program")]
    NoFeasibleGamma,

    #[error("dual certificate degenerate: {0}")]
    DegenerateCertificate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
