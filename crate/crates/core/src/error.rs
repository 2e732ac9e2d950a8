use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("bag {bag:?}: no tokens survive pruning")]
    EmptyVocabulary { bag: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("model format error: {0}")]
    ModelFormat(String),

    #[error("degenerate mass at node {node}")]
    DegenerateMass { node: usize },

    #[error("non-finite {what}{}", cycle.map(|c| format!(" at cycle {c}")).unwrap_or_default())]
    NonFinite { what: String, cycle: Option<usize> },

    #[error("empty query after vocabulary filtering")]
    EmptyQuery,

    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn non_finite(what: impl Into<String>) -> Self {
        Error::NonFinite { what: what.into(), cycle: None }
    }
}
