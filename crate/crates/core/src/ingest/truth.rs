use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::TruthError;

/// Declared keys of a schema, used only to score discovery output.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthFile {
    pub format_version: String,
    #[serde(default)]
    pub primary_keys: Vec<TruthPrimaryKey>,
    #[serde(default)]
    pub foreign_keys: Vec<TruthForeignKey>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthPrimaryKey {
    /// `schema.table`, or a bare table name.
    pub table: String,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthForeignKey {
    pub source_table: String,
    pub source_column: String,
    pub target_table: String,
    pub target_column: String,
}

pub fn parse_truth(text: &str) -> Result<TruthFile, TruthError> {
    let truth: TruthFile = serde_json::from_str(text).map_err(|e| TruthError::Parse(e.to_string()))?;
    if truth.format_version != super::MANIFEST_VERSION {
        return Err(TruthError::Parse(format!(
            "unsupported format version `{}`",
            truth.format_version
        )));
    }
    if truth.primary_keys.iter().any(|pk| pk.columns.is_empty()) {
        return Err(TruthError::Parse("primary key with no columns".into()));
    }
    Ok(truth)
}

pub fn load_truth(path: &Path) -> Result<TruthFile, TruthError> {
    let text = std::fs::read_to_string(path).map_err(|source| TruthError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_truth(&text)
}
