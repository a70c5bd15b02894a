use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("duplicate identifier: {0}")]
    DuplicateIdentifier(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("unresolved reference: {0}")]
    UnresolvedReference(String),
    #[error("unknown document: {0}")]
    UnknownDocument(String),
    #[error("span {starts_at}..{ends_at} outside document {doc_id} of length {length}")]
    OutOfRange {
        doc_id: String,
        starts_at: u64,
        ends_at: u64,
        length: u64,
    },
    #[error("unit mismatch: {0}")]
    UnitMismatch(String),
    #[error("cyclic anchor through {0}")]
    CyclicAnchor(String),
    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown element <{name}> at {line}:{column}")]
    UnknownElement {
        name: String,
        line: usize,
        column: usize,
    },
    #[error("conflicting anchor at {line}:{column}: {message}")]
    ConflictingAnchor {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("serialization refused: {0}")]
    SerializationRefused(String),
    #[error("invalid category: {0}")]
    InvalidCategory(String),
    #[error("alignment error: record {record} ({token:?}) not found in text")]
    Alignment { record: usize, token: String },
    #[error("format error on line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("ambiguity: {0}")]
    Ambiguity(String),
    #[error("incompatible layers: {0}")]
    IncompatibleLayers(String),
    #[error("not textual: {0}")]
    NotTextual(String),
}

impl Error {
    /// Stable kebab-case name used as a diagnostic code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::DuplicateIdentifier(_) => "duplicate-identifier",
            Error::NotFound(_) => "not-found",
            Error::UnresolvedReference(_) => "unresolved-reference",
            Error::UnknownDocument(_) => "unknown-document",
            Error::OutOfRange { .. } => "out-of-range",
            Error::UnitMismatch(_) => "unit-mismatch",
            Error::CyclicAnchor(_) => "cyclic-anchor",
            Error::Parse { .. } => "parse-error",
            Error::UnknownElement { .. } => "unknown-element",
            Error::ConflictingAnchor { .. } => "conflicting-anchor",
            Error::SerializationRefused(_) => "serialization-refused",
            Error::InvalidCategory(_) => "invalid-category",
            Error::Alignment { .. } => "alignment-error",
            Error::Format { .. } => "format-error",
            Error::Ambiguity(_) => "ambiguity-error",
            Error::IncompatibleLayers(_) => "incompatible-layers",
            Error::NotTextual(_) => "not-textual",
        }
    }

    /// Source position, when the error came from reading a file.
    pub fn position(&self) -> Option<(usize, usize)> {
        match self {
            Error::Parse { line, column, .. }
            | Error::UnknownElement { line, column, .. }
            | Error::ConflictingAnchor { line, column, .. } => Some((*line, *column)),
            Error::Format { line, .. } => Some((*line, 0)),
            _ => None,
        }
    }
}
