use thiserror::Error;

use crate::region::{AxisId, ContextId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("reference point list is empty")]
    EmptyPoints,
    #[error("reference point {index}: {reason}")]
    InvalidPoint { index: usize, reason: String },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("context mismatch: expected `{expected}`, found `{found}`")]
    ContextMismatch { expected: ContextId, found: ContextId },
    #[error("context `{context}` has {count} axes, limit is {limit}")]
    TooManyAxes { context: ContextId, count: usize, limit: usize },
    #[error("axes {axes:?} cannot be separated from the rest of the region")]
    NonSeparable { axes: Vec<AxisId> },
    #[error("unknown axis `{0}`")]
    UnknownAxis(AxisId),
    #[error("axis `{0}` is not derived")]
    NotDerived(AxisId),
    #[error("reference region for axis `{0}` is missing")]
    MissingReference(AxisId),
    #[error("region has no factor over axis `{0}`")]
    MissingFactor(AxisId),
    #[error("axis `{0}` already present in the target context")]
    AxisConflict(AxisId),
    #[error("axis reference cycle through `{0}`")]
    ReferenceCycle(AxisId),
    #[error("unknown hedge `{0}`")]
    UnknownHedge(String),
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
    #[error("operator `{0}` has no internal context")]
    NoInternalContext(String),
    #[error("unknown word(s): {}", .0.join(", "))]
    UnknownWords(Vec<String>),
    #[error("empty phrase")]
    EmptyPhrase,
    #[error("ungrammatical phrase: {0}")]
    Ungrammatical(String),
    #[error("no description found: {0}")]
    NoDescription(String),
    #[error("target has {0} axes; only 1D and 2D targets can be rendered")]
    NotRenderable(usize),
    #[error("document error at `{path}`: {message}")]
    Document { path: String, message: String },
    #[error("scenario line {line}: {message}")]
    Scenario { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
}
