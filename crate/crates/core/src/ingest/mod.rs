//! Snapshot ingestion: manifest + per-table delimited files into a
//! [`SchemaSnapshot`], plus the catalog-provider extension point.

pub mod delimited;
mod manifest;
mod truth;

pub use delimited::{parse_delimited, write_delimited, Cell};
pub use manifest::{
    parse_manifest, ManifestColumn, ManifestSchema, ManifestTable, SnapshotManifest,
    MANIFEST_VERSION,
};
pub use truth::{load_truth, parse_truth, TruthFile, TruthForeignKey, TruthPrimaryKey};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::IngestError;
use crate::model::{CanonicalType, ColumnMeta, TableMeta, TableRef};

/// Column-major cell storage for one table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TableData {
    pub columns: Vec<Vec<Cell>>,
}

impl TableData {
    pub fn from_rows(width: usize, rows: impl IntoIterator<Item = Vec<Cell>>) -> Self {
        let mut columns = vec![Vec::new(); width];
        for row in rows {
            for (col, cell) in columns.iter_mut().zip(row) {
                col.push(cell);
            }
        }
        Self { columns }
    }

    pub fn row_count(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, index: usize) -> &[Cell] {
        self.columns.get(index).map_or(&[], Vec::as_slice)
    }

    /// Copies out the given rows, preserving their order.
    pub fn select_rows(&self, rows: &[usize]) -> TableData {
        TableData {
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&r| c[r].clone()).collect())
                .collect(),
        }
    }
}

/// Schema/table include-exclude filters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TableFilters {
    #[serde(default)]
    pub include_schemas: Vec<String>,
    #[serde(default)]
    pub exclude_schemas: Vec<String>,
    /// Entries are `schema.table` or a bare table name.
    #[serde(default)]
    pub exclude_tables: Vec<String>,
}

impl TableFilters {
    pub fn admits(&self, table: &TableRef) -> bool {
        let eq = |a: &str, b: &str| a.eq_ignore_ascii_case(b);
        if !self.include_schemas.is_empty()
            && !self.include_schemas.iter().any(|s| eq(s, &table.schema))
        {
            return false;
        }
        if self.exclude_schemas.iter().any(|s| eq(s, &table.schema)) {
            return false;
        }
        !self.exclude_tables.iter().any(|t| match t.split_once('.') {
            Some((s, n)) => eq(s, &table.schema) && eq(n, &table.table),
            None => eq(t, &table.table),
        })
    }
}

/// Everything discovery is allowed to see: structure and rows, nothing else.
#[derive(Debug, Clone, Copy)]
pub struct DiscoveryInput<'a> {
    pub tables: &'a [TableMeta],
    pub data: &'a BTreeMap<TableRef, TableData>,
}

impl<'a> DiscoveryInput<'a> {
    pub fn table(&self, table: &TableRef) -> Option<&'a TableMeta> {
        self.tables.iter().find(|t| &t.table_ref() == table)
    }

    pub fn column_values(&self, table: &TableRef, column: &str) -> Option<&'a [Cell]> {
        let meta = self.table(table)?;
        let idx = meta.column_index(column)?;
        self.data.get(table).map(|d| d.column(idx))
    }
}

/// A loaded schema: table structure, row data and (quarantined) declared
/// constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaSnapshot {
    pub tables: Vec<TableMeta>,
    data: BTreeMap<TableRef, TableData>,
    declared_constraints: Option<TruthFile>,
}

impl SchemaSnapshot {
    pub fn new(
        mut tables: Vec<TableMeta>,
        data: BTreeMap<TableRef, TableData>,
        declared_constraints: Option<TruthFile>,
    ) -> Result<Self, IngestError> {
        tables.sort_by_key(TableMeta::table_ref);
        for t in &tables {
            t.validate()?;
            let width = t.columns.len();
            if let Some(d) = data.get(&t.table_ref()) {
                if d.columns.len() != width {
                    return Err(IngestError::RowArity {
                        file: t.table_ref().to_string(),
                        row: 0,
                        expected: width,
                        found: d.columns.len(),
                    });
                }
            }
        }
        Ok(Self {
            tables,
            data,
            declared_constraints,
        })
    }

    pub fn discovery_input(&self) -> DiscoveryInput<'_> {
        DiscoveryInput {
            tables: &self.tables,
            data: &self.data,
        }
    }

    pub fn data(&self, table: &TableRef) -> Option<&TableData> {
        self.data.get(table)
    }

    /// Declared keys shipped with the snapshot. Evaluation only.
    pub fn declared_constraints(&self) -> Option<&TruthFile> {
        self.declared_constraints.as_ref()
    }

    pub fn set_declared_constraints(&mut self, truth: Option<TruthFile>) {
        self.declared_constraints = truth;
    }

    pub fn filtered(mut self, filters: &TableFilters) -> Self {
        self.tables.retain(|t| filters.admits(&t.table_ref()));
        let keep: std::collections::BTreeSet<TableRef> =
            self.tables.iter().map(TableMeta::table_ref).collect();
        self.data.retain(|t, _| keep.contains(t));
        self
    }

    /// Pulls structure and rows through a catalog provider.
    pub fn from_provider(
        provider: &dyn CatalogProvider,
        sample_size: usize,
        seed: u64,
    ) -> Result<Self, IngestError> {
        let mut tables = Vec::new();
        let mut data = BTreeMap::new();
        for t in provider.list_tables()? {
            let mut meta = provider.table_meta(&t)?;
            meta.row_count = provider.fast_row_count(&t)?;
            data.insert(t.clone(), provider.fetch_sample(&t, sample_size, seed)?);
            tables.push(meta);
        }
        Self::new(tables, data, None)
    }
}

/// Extension point for live catalogs. Implementations are responsible for
/// platform-specific fast row counts and server-side sampling.
pub trait CatalogProvider {
    fn list_tables(&self) -> Result<Vec<TableRef>, IngestError>;
    fn table_meta(&self, table: &TableRef) -> Result<TableMeta, IngestError>;
    fn fetch_sample(
        &self,
        table: &TableRef,
        sample_size: usize,
        seed: u64,
    ) -> Result<TableData, IngestError>;
    fn fast_row_count(&self, table: &TableRef) -> Result<u64, IngestError>;
}

impl CatalogProvider for SchemaSnapshot {
    fn list_tables(&self) -> Result<Vec<TableRef>, IngestError> {
        Ok(self.tables.iter().map(TableMeta::table_ref).collect())
    }

    fn table_meta(&self, table: &TableRef) -> Result<TableMeta, IngestError> {
        self.tables
            .iter()
            .find(|t| &t.table_ref() == table)
            .cloned()
            .ok_or_else(|| crate::error::SchemaError::UnknownTable(table.to_string()).into())
    }

    fn fetch_sample(
        &self,
        table: &TableRef,
        sample_size: usize,
        seed: u64,
    ) -> Result<TableData, IngestError> {
        let data = self
            .data
            .get(table)
            .ok_or_else(|| crate::error::SchemaError::UnknownTable(table.to_string()))?;
        Ok(data.select_rows(&sample_rows(data.row_count(), table, sample_size, seed)))
    }

    fn fast_row_count(&self, table: &TableRef) -> Result<u64, IngestError> {
        Ok(self.table_meta(table)?.row_count)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Deterministic row sample: indices of a seeded random subset, ascending.
///
/// `sample_size == 0` disables sampling entirely; tables no larger than the
/// sample size are returned whole.
pub fn sample_rows(row_count: usize, table: &TableRef, sample_size: usize, seed: u64) -> Vec<usize> {
    if sample_size == 0 {
        return Vec::new();
    }
    if row_count <= sample_size {
        return (0..row_count).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(table.to_string().as_bytes()));
    let mut picked = rand::seq::index::sample(&mut rng, row_count, sample_size).into_vec();
    picked.sort_unstable();
    picked
}

fn read(path: &Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            IngestError::MissingFile(path.to_path_buf())
        } else {
            IngestError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })
}

fn table_from_manifest(schema: &str, table: &ManifestTable) -> TableMeta {
    let mut cols: Vec<&ManifestColumn> = table.columns.iter().collect();
    cols.sort_by_key(|c| c.ordinal);
    let columns = cols
        .into_iter()
        .map(|c| {
            let (ty, known) = CanonicalType::from_physical(&c.physical_type);
            if !known {
                log::warn!(
                    "{schema}.{}.{}: unknown type `{}` mapped to OTHER",
                    table.name,
                    c.name,
                    c.physical_type
                );
            }
            ColumnMeta {
                name: c.name.clone(),
                ordinal_position: c.ordinal,
                canonical_type: ty,
                physical_type: c.physical_type.clone(),
                nullable: c.nullable,
                default_expr: c.default.clone(),
                existing_description: c.description.clone(),
            }
        })
        .collect();
    TableMeta {
        schema_name: schema.to_string(),
        table_name: table.name.clone(),
        columns,
        row_count: table.row_count,
        existing_description: table.description.clone(),
    }
}

/// Parses one table's data file against its column list.
pub fn parse_table_data(file: &str, text: &str, meta: &TableMeta) -> Result<TableData, IngestError> {
    let mut records = parse_delimited(text)
        .map_err(|e| IngestError::Delimited {
            file: file.to_string(),
            line: e.line,
            message: e.message,
        })?
        .into_iter();
    let expected: Vec<String> = meta.columns.iter().map(|c| c.name.clone()).collect();
    let header: Vec<String> = records
        .next()
        .unwrap_or_default()
        .into_iter()
        .map(Option::unwrap_or_default)
        .collect();
    if header != expected {
        return Err(IngestError::HeaderMismatch {
            file: file.to_string(),
            expected,
            found: header,
        });
    }
    let width = expected.len();
    let mut rows = Vec::new();
    for (i, rec) in records.enumerate() {
        if rec.len() != width {
            return Err(IngestError::RowArity {
                file: file.to_string(),
                row: i + 1,
                expected: width,
                found: rec.len(),
            });
        }
        rows.push(rec);
    }
    Ok(TableData::from_rows(width, rows))
}

/// Loads a snapshot manifest and every data file it references. Relative
/// paths resolve against the manifest's directory.
pub fn load_snapshot(manifest_path: &Path) -> Result<SchemaSnapshot, IngestError> {
    let manifest = parse_manifest(&read(manifest_path)?)?;
    let base: PathBuf = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let mut tables = Vec::new();
    let mut data = BTreeMap::new();
    for schema in &manifest.schemas {
        for table in &schema.tables {
            let meta = table_from_manifest(&schema.name, table);
            let path = base.join(&table.data_file);
            let rows = parse_table_data(&table.data_file, &read(&path)?, &meta)?;
            data.insert(meta.table_ref(), rows);
            tables.push(meta);
        }
    }
    let truth = match &manifest.ground_truth_file {
        Some(f) => Some(load_truth(&base.join(f)).map_err(|e| IngestError::Manifest(e.to_string()))?),
        None => None,
    };
    SchemaSnapshot::new(tables, data, truth)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_fixture(dir: &Path, with_missing: bool) -> PathBuf {
        let manifest = serde_json::json!({
            "format_version": "1",
            "schemas": [{
                "name": "dbo",
                "tables": [
                    {"name": "a", "row_count": 2, "data_file": "a.csv", "columns": [
                        {"name": "id", "type": "int", "nullable": false, "ordinal": 0},
                        {"name": "guid", "type": "uniqueidentifier", "nullable": false, "ordinal": 1},
                        {"name": "shape", "type": "geometry", "nullable": true, "ordinal": 2}
                    ]},
                    {"name": "b", "row_count": 1, "data_file": if with_missing { "nope.csv" } else { "b.csv" }, "columns": [
                        {"name": "id", "type": "int", "nullable": false, "ordinal": 0},
                        {"name": "a_id", "type": "int", "nullable": true, "ordinal": 1},
                        {"name": "note", "type": "varchar(10)", "nullable": true, "ordinal": 2}
                    ]}
                ]
            }]
        });
        std::fs::write(dir.join("a.csv"), "id,guid,shape\n1,6f1c0e2a-0000-4000-8000-000000000001,\n2,6f1c0e2a-0000-4000-8000-000000000002,\"\"\n").unwrap();
        std::fs::write(dir.join("b.csv"), "id,a_id,note\n1,,x\n").unwrap();
        let p = dir.join("manifest.json");
        std::fs::write(&p, serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
        p
    }

    #[test]
    fn loads_two_tables_with_six_columns() {
        let dir = tempfile::tempdir().unwrap();
        let snap = load_snapshot(&write_fixture(dir.path(), false)).unwrap();
        assert_eq!(snap.tables.len(), 2);
        assert_eq!(snap.tables.iter().map(|t| t.columns.len()).sum::<usize>(), 6);
        let a = &snap.tables[0];
        assert_eq!(a.columns[1].canonical_type, CanonicalType::Uuid);
        assert_eq!(a.columns[2].canonical_type, CanonicalType::Other);
        let data = snap.data(&a.table_ref()).unwrap();
        assert_eq!(data.column(2), &[None, Some(String::new())]);
        // idempotent
        assert_eq!(snap, load_snapshot(&dir.path().join("manifest.json")).unwrap());
    }

    #[test]
    fn absent_data_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_snapshot(&write_fixture(dir.path(), true)).unwrap_err();
        assert!(matches!(err, IngestError::MissingFile(_)), "{err}");
    }

    #[test]
    fn arity_mismatch_is_reported() {
        let meta = table_from_manifest(
            "dbo",
            &ManifestTable {
                name: "t".into(),
                columns: vec![ManifestColumn {
                    name: "x".into(),
                    physical_type: "int".into(),
                    nullable: true,
                    ordinal: 0,
                    default: None,
                    description: None,
                }],
                row_count: 1,
                data_file: "t.csv".into(),
                description: None,
            },
        );
        let err = parse_table_data("t.csv", "x\n1,2\n", &meta).unwrap_err();
        assert!(matches!(err, IngestError::RowArity { found: 2, .. }));
        let err = parse_table_data("t.csv", "y\n1\n", &meta).unwrap_err();
        assert!(matches!(err, IngestError::HeaderMismatch { .. }));
    }

    #[test]
    fn bad_manifests_are_rejected() {
        assert!(matches!(
            parse_manifest(r#"{"format_version":"2","schemas":[]}"#),
            Err(IngestError::UnsupportedVersion(_))
        ));
        let gap = r#"{"format_version":"1","schemas":[{"name":"s","tables":[{"name":"t","row_count":0,"data_file":"t.csv","columns":[{"name":"a","type":"int","nullable":true,"ordinal":1}]}]}]}"#;
        assert!(parse_manifest(gap).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_bounded() {
        let t = TableRef::new("dbo", "big");
        assert_eq!(sample_rows(500, &t, 1000, 1), (0..500).collect::<Vec<_>>());
        let a = sample_rows(10_000, &t, 1000, 42);
        let b = sample_rows(10_000, &t, 1000, 42);
        assert_eq!(a.len(), 1000);
        assert_eq!(a, b);
        assert_ne!(a, sample_rows(10_000, &t, 1000, 43));
        assert!(sample_rows(10_000, &t, 0, 42).is_empty());
        assert!(sample_rows(0, &t, 1000, 42).is_empty());
    }

    #[test]
    fn filters() {
        let f = TableFilters {
            include_schemas: vec![],
            exclude_schemas: vec!["audit".into()],
            exclude_tables: vec!["dbo.secret".into(), "tmp".into()],
        };
        assert!(f.admits(&TableRef::new("dbo", "cst")));
        assert!(!f.admits(&TableRef::new("audit", "log")));
        assert!(!f.admits(&TableRef::new("dbo", "SECRET")));
        assert!(!f.admits(&TableRef::new("sales", "tmp")));
    }
}
