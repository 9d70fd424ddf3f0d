use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("edge ({user}, {cache}) is out of range for {n_users} users and {n_caches} caches")]
    EdgeOutOfRange {
        user: usize,
        cache: usize,
        n_users: usize,
        n_caches: usize,
    },
    #[error("duplicate edge ({user}, {cache})")]
    DuplicateEdge { user: usize, cache: usize },
    #[error("file id {file} is outside a catalog of {n_files} files")]
    FileOutOfRange { file: usize, n_files: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("topology is not right-regular")]
    IrregularTopology,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported combination: {0}")]
    Unsupported(String),
    #[error("sequential contract violated: {0}")]
    Sequence(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }
}
