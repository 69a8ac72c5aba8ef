use thiserror::Error;

use crate::layout::LayoutKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid system profile: {0}")]
    InvalidProfile(String),

    #[error("invalid data statistics: {0}")]
    InvalidStats(String),

    #[error("invalid layout geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid operation profile: {0}")]
    InvalidOperation(String),

    #[error("layout kind mismatch: expected {expected:?}, found {found:?}")]
    KindMismatch {
        expected: LayoutKind,
        found: LayoutKind,
    },

    #[error("cost estimate was produced for {found} but {expected} was requested")]
    ModeMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("table has no row groups")]
    EmptyTable,

    #[error("unknown format `{0}`")]
    UnknownFormat(String),

    #[error("workflow parse error: {0}")]
    Parse(String),

    #[error("workflow contains a cycle through node `{0}`")]
    CycleDetected(String),

    #[error("unknown operation kind `{0}`")]
    UnknownOperationKind(String),

    #[error("edge references unknown node `{0}`")]
    DanglingEdge(String),

    #[error("inconsistent statistics: {0}")]
    InconsistentStats(String),

    #[error("statistics are incomplete for cost-based selection")]
    IncompleteStats,

    #[error("operation list is empty")]
    EmptyOperationList,

    #[error("no candidate formats given")]
    NoCandidates,

    #[error("catalog schema version mismatch (expected {expected}, found {found:?})")]
    SchemaVersionMismatch { expected: u32, found: Option<u64> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
