use std::path::PathBuf;

use thiserror::Error;

/// Integrity problems in the in-memory schema model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemaError {
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("duplicate column `{column}` in `{table}`")]
    DuplicateColumn { table: String, column: String },
    #[error("ordinal positions of `{table}` are not contiguous from 0")]
    NonContiguousOrdinals { table: String },
    #[error("relationship {relationship} has mismatched column lists")]
    ArityMismatch { relationship: String },
    #[error("relationship {relationship} references its own columns")]
    SelfReferenceOnSameColumns { relationship: String },
    #[error("relationship {relationship} confidence outside 0..=100")]
    ConfidenceOutOfRange { relationship: String },
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing data file {0}")]
    MissingFile(PathBuf),
    #[error("malformed manifest: {0}")]
    Manifest(String),
    #[error("unsupported manifest format version `{0}`")]
    UnsupportedVersion(String),
    #[error("{file}: line {line}: {message}")]
    Delimited {
        file: String,
        line: usize,
        message: String,
    },
    #[error("{file}: row {row} has {found} fields, expected {expected}")]
    RowArity {
        file: String,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("{file}: header {found:?} does not match column order {expected:?}")]
    HeaderMismatch {
        file: String,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

#[derive(Debug, Error)]
pub enum AnalyzerError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("analyzer returned an invalid response: {0}")]
    InvalidResponse(String),
    #[error("missing credential: environment variable `{0}` is not set")]
    MissingCredential(String),
    #[error("template error: {0}")]
    Template(String),
}

#[derive(Debug, Error)]
pub enum TruthError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed truth file: {0}")]
    Parse(String),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed state file {path}: {message}")]
    State { path: PathBuf, message: String },
    #[error(
        "configuration digest {found} does not match the digest {expected} recorded in the \
         state file; discovery or refinement settings changed since the run started"
    )]
    DigestMismatch { expected: String, found: String },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Analyzer(#[from] AnalyzerError),
}
