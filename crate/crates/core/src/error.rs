use thiserror::Error;

use crate::word::Word;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed offspring spec at byte {position}: {message} (token `{token}`)")]
    OffspringSpec {
        position: usize,
        token: String,
        message: String,
    },
    #[error("invalid distribution: {0}")]
    Distribution(String),
    #[error("offspring mean {mean} outside (1, inf); size-biasing needs a supercritical law")]
    NotSupercritical { mean: f64 },
    #[error("argument out of range: {0}")]
    Domain(String),
    #[error("generation {requested} lies below the truncation depth {depth}")]
    BeyondTruncation { requested: usize, depth: usize },
    #[error("word {0} is not in the tree")]
    NotInTree(Word),
    #[error("malformed word `{0}`")]
    MalformedWord(String),
    #[error("tree records violate the tree axioms: {0} violation(s)")]
    InvalidTree(usize),
    #[error("population cap exceeded: {nodes} nodes > cap {cap}")]
    PopulationCap { nodes: u64, cap: u64 },
    #[error("not enough samples: {got} < {needed}")]
    TooFewSamples { got: usize, needed: usize },
    #[error("gauge undefined at generation {generation}: {reason}")]
    GaugeUndefined { generation: usize, reason: String },
    #[error("missing W field for grafted vertex {0}")]
    MissingWField(Word),
    #[error("truncation mismatch: {0}")]
    TruncationMismatch(String),
    #[error("enumeration too large: {0}")]
    EnumerationTooLarge(String),
    #[error("functional {0} cannot be evaluated on this input")]
    Functional(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
