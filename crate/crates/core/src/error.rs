use thiserror::Error;

/// Errors produced by the structure-learning library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("non-finite value produced by {op}")]
    NonFiniteValue { op: &'static str },
    #[error("backward requires a scalar loss, got shape {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },
    #[error("dropout rate must lie in [0, 1), got {0}")]
    InvalidRate(f64),
    #[error("incidence weight {weight} at ({vertex}, {hyperedge}) is outside [0, 1]")]
    InvalidWeight {
        vertex: usize,
        hyperedge: usize,
        weight: f64,
    },
    #[error("vertex index {index} out of range for {n_vertices} vertices")]
    VertexOutOfRange { index: usize, n_vertices: usize },
    #[error("degenerate structure: {0}")]
    DegenerateStructure(String),
    #[error("alpha must lie in [0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("epsilon must be finite and non-negative, got {0}")]
    InvalidEpsilon(f64),
    #[error("value {0} outside [0, 1]")]
    OutOfDomain(f64),
    #[error("mask selects no nodes")]
    EmptyMask,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("cannot add {requested} edges: only {available} unconnected pairs")]
    InsufficientPairs { requested: usize, available: usize },
    #[error("class {0} has no members")]
    EmptyClass(usize),
    #[error("class {class} has {available} members, {requested} requested for training")]
    ClassTooSmall {
        class: usize,
        requested: usize,
        available: usize,
    },
    #[error("dataset mask error: {0}")]
    DatasetMask(String),
    #[error("unknown mask {0:?} (expected train, val or test)")]
    UnknownMask(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
