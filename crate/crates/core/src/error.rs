use alloc::string::String;

/// Errors raised by the engine.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node id `{0}`")]
    DuplicateId(String),
    #[error("network contains a cycle through `{0}`")]
    Cycle(String),
    #[error("node `{0}` is declared before one of its sources")]
    NotTopological(String),
    #[error("invalid node `{node}`: {reason}")]
    InvalidNode { node: String, reason: &'static str },
    #[error("constraint mentions node `{0}` more than once")]
    DuplicateTerm(String),
    #[error("input `{0}` has no finite lower and upper bound")]
    UnboundedInput(String),
    #[error("expected {expected} input values, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("network has no outputs")]
    NoOutputs,
    #[error("unknown LP variable {0}")]
    UnknownVar(usize),
    #[error("batch `{0}` is not the most recently pushed batch")]
    BatchOrder(String),
    #[error("new bound {value} crosses the opposite bound of variable {var}")]
    BoundCross { var: usize, value: f64 },
    #[error("simplex failed to converge: {0}")]
    Numeric(&'static str),
    #[error("conflict at decision level 0")]
    RootConflict,
    #[error("every variable is already assigned")]
    AllAssigned,
    #[error("fixture is feasible; nothing to filter")]
    NotInfeasible,
    #[error("time or conflict budget exhausted")]
    Timeout,
    #[error("{0} phase combinations exceed the oracle cap of {1}")]
    TooLarge(u128, u128),
}

pub type Result<T> = core::result::Result<T, Error>;
