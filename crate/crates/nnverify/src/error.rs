use std::path::PathBuf;

/// Errors raised by the file formats, queries and command line.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("E_PARSE: line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("E_UNKNOWN_NODE: line {line}: unknown node `{name}`")]
    UnknownNode { line: usize, name: String },
    #[error("E_CYCLE: network contains a cycle through `{0}`")]
    Cycle(String),
    #[error("E_UNBOUNDED_INPUT: input `{0}` lacks a finite lower or upper bound")]
    UnboundedInput(String),
    #[error("E_DUPLICATE_ID: line {line}: `{name}` is declared twice")]
    DuplicateId { line: usize, name: String },
    #[error("E_MISCLASSIFIED_BASE: base point is classified as {actual}, expected {expected}")]
    MisclassifiedBase { expected: usize, actual: usize },
    #[error("E_GRID_MISMATCH: grid has {cells} cells but the network has {inputs} inputs")]
    GridMismatch { cells: usize, inputs: usize },
    #[error("E_QUERY: {0}")]
    Query(String),
    #[error("E_SHAPE: {0}")]
    Shape(String),
    #[error("E_LP_PARSE: line {line}: {message}")]
    LpParse { line: usize, message: String },
    #[error("E_ENGINE: {0}")]
    Engine(#[from] nnverify_core::Error),
    #[error("E_IO: {path}: {cause}")]
    Io { path: PathBuf, cause: std::io::Error },
}

impl Error {
    /// The stable `E_*` code of this error.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "E_PARSE",
            Error::UnknownNode { .. } => "E_UNKNOWN_NODE",
            Error::Cycle(_) => "E_CYCLE",
            Error::UnboundedInput(_) => "E_UNBOUNDED_INPUT",
            Error::DuplicateId { .. } => "E_DUPLICATE_ID",
            Error::MisclassifiedBase { .. } => "E_MISCLASSIFIED_BASE",
            Error::GridMismatch { .. } => "E_GRID_MISMATCH",
            Error::Query(_) => "E_QUERY",
            Error::Shape(_) => "E_SHAPE",
            Error::LpParse { .. } => "E_LP_PARSE",
            Error::Engine(_) => "E_ENGINE",
            Error::Io { .. } => "E_IO",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
