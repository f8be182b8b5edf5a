use thiserror::Error;

/// Errors raised by operator algebra, process construction and capacity estimation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("duplicate subsystem label `{0}`")]
    DuplicateLabel(String),

    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),

    #[error("{0:?} is not a permutation of the operator's labels")]
    NotAPermutation(Vec<String>),

    #[error("subsystem `{0}` has dimension 0")]
    ZeroDimension(String),

    #[error("matrix is {rows}x{cols} but the subsystems require side {expected}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        expected: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("not a state: {0}")]
    NotAState(String),

    #[error("not a channel: {0}")]
    NotAChannel(String),

    #[error("map is not CPTP: {0}")]
    NotCPTP(String),

    #[error("not an instrument: {0}")]
    NotAnInstrument(String),

    #[error("process must carry labels {{A_I, A_O, B_I, B_O}}, found {0:?}")]
    WrongLabels(Vec<String>),

    #[error("invalid process: {0}")]
    InvalidProcess(String),

    #[error("label mismatch: {0}")]
    LabelMismatch(String),

    #[error("argument is not ordered as {0}")]
    OrderMismatch(String),

    #[error("positivity could not be restored by mixing with the uniform process")]
    ProjectionFailed,

    #[error("operator side {side} exceeds the dimension guard {limit}")]
    TooLarge { side: usize, limit: usize },

    #[error("channel matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },

    #[error("iteration did not converge within {0} steps")]
    NoConvergence(usize),

    #[error("optimizer budget exceeded: {0}")]
    OptimizerBudgetExceeded(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
