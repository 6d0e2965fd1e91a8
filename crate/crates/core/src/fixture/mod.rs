//! Deterministic synthetic schemas with known keys and planted defects.

mod presets;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::IngestError;
use crate::ingest::{
    write_delimited, Cell, ManifestColumn, ManifestSchema, ManifestTable, SchemaSnapshot,
    SnapshotManifest, TableData, TruthFile, MANIFEST_VERSION,
};
use crate::model::{CanonicalType, ColumnMeta, TableMeta, TableRef};

pub use presets::{chain4, lousy8, nopk, PRESETS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamingStyle {
    Clean,
    Cryptic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Defect {
    UniqueNonPkAtLatePosition,
    RowguidTarget,
    CoincidentalOverlapBelow75,
    OrphanRows20pct,
    NullPkViolation,
    TwoUniqueColumns,
}

impl Defect {
    pub const ALL: [Defect; 6] = [
        Defect::UniqueNonPkAtLatePosition,
        Defect::RowguidTarget,
        Defect::CoincidentalOverlapBelow75,
        Defect::OrphanRows20pct,
        Defect::NullPkViolation,
        Defect::TwoUniqueColumns,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureShape {
    /// Eight-table sales schema over three dependency levels.
    Sales,
    /// Four tables, each referencing the next.
    Chain,
    /// Parents keyed by codes that key scoring does not accept.
    CodeKeyed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub name: String,
    pub seed: u64,
    pub shape: FixtureShape,
    pub table_count: usize,
    pub depth: usize,
    pub naming: NamingStyle,
    pub defects: Vec<Defect>,
}

impl FixtureSpec {
    pub fn has(&self, d: Defect) -> bool {
        self.defects.contains(&d)
    }
}

/// A generated schema: structure, rows and declared keys.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub spec: FixtureSpec,
    pub tables: Vec<TableMeta>,
    pub data: BTreeMap<TableRef, TableData>,
    pub truth: TruthFile,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRUTH_FILE: &str = "truth.json";

pub fn generate(spec: &FixtureSpec) -> Fixture {
    match spec.shape {
        FixtureShape::Sales => presets::sales(spec),
        FixtureShape::Chain => presets::chain(spec),
        FixtureShape::CodeKeyed => presets::code_keyed(spec),
    }
}

pub fn preset(name: &str) -> Option<FixtureSpec> {
    match name {
        "lousy8" => Some(lousy8()),
        "chain4" => Some(chain4()),
        "nopk" => Some(nopk()),
        _ => None,
    }
}

impl Fixture {
    pub fn snapshot(&self) -> SchemaSnapshot {
        SchemaSnapshot::new(self.tables.clone(), self.data.clone(), Some(self.truth.clone()))
            .expect("generated fixtures are well-formed")
    }

    pub fn manifest(&self) -> SnapshotManifest {
        let mut schemas: BTreeMap<&str, Vec<ManifestTable>> = BTreeMap::new();
        for t in &self.tables {
            schemas.entry(&t.schema_name).or_default().push(ManifestTable {
                name: t.table_name.clone(),
                columns: t
                    .columns
                    .iter()
                    .map(|c| ManifestColumn {
                        name: c.name.clone(),
                        physical_type: c.physical_type.clone(),
                        nullable: c.nullable,
                        ordinal: c.ordinal_position,
                        default: c.default_expr.clone(),
                        description: None,
                    })
                    .collect(),
                row_count: t.row_count,
                data_file: data_file(&t.table_ref()),
                description: None,
            });
        }
        SnapshotManifest {
            format_version: MANIFEST_VERSION.to_string(),
            schemas: schemas
                .into_iter()
                .map(|(name, tables)| ManifestSchema {
                    name: name.to_string(),
                    tables,
                })
                .collect(),
            ground_truth_file: Some(TRUTH_FILE.to_string()),
        }
    }

    /// Rendered files, relative path → content.
    pub fn files(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        out.insert(MANIFEST_FILE.to_string(), to_json(&self.manifest()));
        out.insert(TRUTH_FILE.to_string(), to_json(&self.truth));
        for t in &self.tables {
            let data = &self.data[&t.table_ref()];
            let rows = (0..data.row_count()).map(|r| {
                data.columns
                    .iter()
                    .map(|c| c[r].clone())
                    .collect::<Vec<Cell>>()
            });
            out.insert(
                data_file(&t.table_ref()),
                write_delimited(t.columns.iter().map(|c| c.name.as_str()), rows),
            );
        }
        out
    }

    pub fn write_to(&self, dir: &Path) -> Result<(), IngestError> {
        for (rel, content) in self.files() {
            let path = dir.join(&rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|source| IngestError::Io {
                    path: parent.to_path_buf(),
                    source,
                })?;
            }
            std::fs::write(&path, content).map_err(|source| IngestError::Io { path, source })?;
        }
        Ok(())
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn data_file(t: &TableRef) -> String {
    format!("data/{}.{}.csv", t.schema, t.table)
}

/// Column builder used by the presets.
pub(crate) fn column(name: &str, physical: &str, nullable: bool) -> ColumnMeta {
    let (canonical_type, _) = CanonicalType::from_physical(physical);
    ColumnMeta {
        name: name.to_string(),
        ordinal_position: 0,
        canonical_type,
        physical_type: physical.to_string(),
        nullable,
        default_expr: None,
        existing_description: None,
    }
}

/// Assembles a table from `(column, values)` pairs.
pub(crate) fn table(
    schema: &str,
    name: &str,
    cols: Vec<(ColumnMeta, Vec<Cell>)>,
) -> (TableMeta, TableData) {
    let rows = cols.first().map_or(0, |c| c.1.len());
    assert!(cols.iter().all(|c| c.1.len() == rows), "ragged fixture table {name}");
    let mut columns = Vec::new();
    let mut data = Vec::new();
    for (i, (mut meta, values)) in cols.into_iter().enumerate() {
        meta.ordinal_position = i;
        columns.push(meta);
        data.push(values);
    }
    (
        TableMeta {
            schema_name: schema.to_string(),
            table_name: name.to_string(),
            columns,
            row_count: rows as u64,
            existing_description: None,
        },
        TableData { columns: data },
    )
}
