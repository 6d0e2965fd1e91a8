use serde::{Deserialize, Serialize};

use crate::error::IngestError;

pub const MANIFEST_VERSION: &str = "1";

/// On-disk description of a snapshot: one JSON document plus one delimited
/// data file per table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotManifest {
    pub format_version: String,
    pub schemas: Vec<ManifestSchema>,
    /// Declared keys for evaluation. Never read by discovery.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestSchema {
    pub name: String,
    pub tables: Vec<ManifestTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestTable {
    pub name: String,
    pub columns: Vec<ManifestColumn>,
    pub row_count: u64,
    pub data_file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestColumn {
    pub name: String,
    #[serde(rename = "type")]
    pub physical_type: String,
    pub nullable: bool,
    pub ordinal: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

/// Parses and structurally validates a manifest document.
pub fn parse_manifest(text: &str) -> Result<SnapshotManifest, IngestError> {
    let manifest: SnapshotManifest =
        serde_json::from_str(text).map_err(|e| IngestError::Manifest(e.to_string()))?;
    if manifest.format_version != MANIFEST_VERSION {
        return Err(IngestError::UnsupportedVersion(manifest.format_version));
    }
    for schema in &manifest.schemas {
        if schema.name.is_empty() || schema.name.contains('.') {
            return Err(IngestError::Manifest(format!(
                "invalid schema name `{}`",
                schema.name
            )));
        }
        for table in &schema.tables {
            if table.name.is_empty() || table.name.contains('.') {
                return Err(IngestError::Manifest(format!(
                    "invalid table name `{}`",
                    table.name
                )));
            }
            let mut ordinals: Vec<usize> = table.columns.iter().map(|c| c.ordinal).collect();
            ordinals.sort_unstable();
            if ordinals.iter().enumerate().any(|(i, o)| i != *o) {
                return Err(IngestError::Manifest(format!(
                    "ordinals of `{}.{}` are not contiguous from 0",
                    schema.name, table.name
                )));
            }
            if table.columns.iter().any(|c| c.name.is_empty()) {
                return Err(IngestError::Manifest(format!(
                    "empty column name in `{}.{}`",
                    schema.name, table.name
                )));
            }
        }
    }
    Ok(manifest)
}
