use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes do not fit the operation.
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    /// An operation produced NaN or an infinity.
    NonFinite { op: &'static str },
    /// A softmax or similar normalization over an empty set.
    EmptyNormalization,
    /// Batch statistics requested for zero rows.
    EmptyBatch,
    /// Argument outside its documented domain.
    Domain { what: &'static str, detail: String },
    /// A named parameter is missing from a parameter store.
    MissingParam(String),
    /// A gradient for a named parameter is not finite.
    NonFiniteGradient(String),
    /// The graph violates one of its structural invariants.
    InvalidGraph(String),
    /// No hyperedges of the requested type exist.
    EmptyHyperedgeType(&'static str),
    /// A statistic is undefined for the data (constant input, one class, ...).
    Degenerate(String),
    /// Training configuration is unusable.
    Config(String),
    /// Training diverged.
    NonFiniteLoss { epoch: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape { op, left, right } => {
                write!(f, "{op}: incompatible shapes {left:?} and {right:?}")
            }
            Error::NonFinite { op } => write!(f, "{op}: produced a non-finite value"),
            Error::EmptyNormalization => write!(f, "softmax over an empty set"),
            Error::EmptyBatch => write!(f, "batch normalization over zero rows"),
            Error::Domain { what, detail } => write!(f, "{what}: {detail}"),
            Error::MissingParam(name) => write!(f, "missing parameter `{name}`"),
            Error::NonFiniteGradient(name) => {
                write!(f, "non-finite gradient for parameter `{name}`")
            }
            Error::InvalidGraph(msg) => write!(f, "invalid graph: {msg}"),
            Error::EmptyHyperedgeType(ty) => write!(f, "no hyperedges of type `{ty}`"),
            Error::Degenerate(msg) => write!(f, "degenerate input: {msg}"),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::NonFiniteLoss { epoch } => write!(f, "loss became non-finite at epoch {epoch}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn domain(what: &'static str, detail: impl Into<String>) -> Error {
    Error::Domain {
        what,
        detail: detail.into(),
    }
}
