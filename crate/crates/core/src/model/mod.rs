//! Canonical in-memory schema representation.
//!
//! Everything downstream (profiling, key discovery, refinement, outputs) speaks
//! in terms of [`TableMeta`], [`ColumnMeta`] and [`Relationship`]. Table
//! identity is the `(schema, table)` pair carried by [`TableRef`]; its `Ord`
//! implementation is the iteration order used everywhere for reproducibility.

mod graph;

pub use graph::{build_dependency_graph, DependencyGraph};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::SchemaError;

/// Fully-qualified table identifier, serialized as `schema.table`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct TableRef {
    pub schema: String,
    pub table: String,
}

impl TableRef {
    pub fn new(schema: impl Into<String>, table: impl Into<String>) -> Self {
        Self {
            schema: schema.into(),
            table: table.into(),
        }
    }

    /// Parses `schema.table`. A bare name is placed in the `dbo` schema.
    pub fn parse(s: &str) -> Self {
        match s.split_once('.') {
            Some((schema, table)) => Self::new(schema, table),
            None => Self::new("dbo", s),
        }
    }

    pub fn column(&self, name: impl Into<String>) -> ColumnRef {
        ColumnRef {
            table: self.clone(),
            column: name.into(),
        }
    }
}

impl fmt::Display for TableRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.schema, self.table)
    }
}

impl From<TableRef> for String {
    fn from(t: TableRef) -> Self {
        t.to_string()
    }
}

impl TryFrom<String> for TableRef {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        match s.split_once('.') {
            Some((schema, table)) if !schema.is_empty() && !table.is_empty() => {
                Ok(Self::new(schema, table))
            }
            _ => Err(format!("expected `schema.table`, got `{s}`")),
        }
    }
}

/// A single column of a table.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ColumnRef {
    pub table: TableRef,
    pub column: String,
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.column)
    }
}

/// Identifier of a documentable object: a table or one of its columns.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ObjectId {
    Table(TableRef),
    Column(ColumnRef),
}

impl ObjectId {
    pub fn table(&self) -> &TableRef {
        match self {
            ObjectId::Table(t) => t,
            ObjectId::Column(c) => &c.table,
        }
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectId::Table(t) => t.fmt(f),
            ObjectId::Column(c) => c.fmt(f),
        }
    }
}

impl From<ObjectId> for String {
    fn from(o: ObjectId) -> Self {
        o.to_string()
    }
}

impl TryFrom<String> for ObjectId {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        let parts: Vec<&str> = s.splitn(3, '.').collect();
        match parts.as_slice() {
            [schema, table] if !schema.is_empty() && !table.is_empty() => {
                Ok(ObjectId::Table(TableRef::new(*schema, *table)))
            }
            [schema, table, column]
                if !schema.is_empty() && !table.is_empty() && !column.is_empty() =>
            {
                Ok(ObjectId::Column(TableRef::new(*schema, *table).column(*column)))
            }
            _ => Err(format!("malformed object id `{s}`")),
        }
    }
}

/// Fixed enumeration every physical type is normalized to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CanonicalType {
    Int,
    Bigint,
    Smallint,
    Decimal,
    Float,
    Varchar,
    Text,
    Date,
    Time,
    Timestamp,
    Boolean,
    Uuid,
    Binary,
    Other,
}

impl CanonicalType {
    pub const ALL: [CanonicalType; 14] = [
        CanonicalType::Int,
        CanonicalType::Bigint,
        CanonicalType::Smallint,
        CanonicalType::Decimal,
        CanonicalType::Float,
        CanonicalType::Varchar,
        CanonicalType::Text,
        CanonicalType::Date,
        CanonicalType::Time,
        CanonicalType::Timestamp,
        CanonicalType::Boolean,
        CanonicalType::Uuid,
        CanonicalType::Binary,
        CanonicalType::Other,
    ];

    /// Maps a physical type string (any common SQL dialect spelling, optional
    /// length/precision suffix) onto the canonical enumeration. The boolean is
    /// `false` when the name was not recognized and fell through to `Other`.
    pub fn from_physical(physical: &str) -> (CanonicalType, bool) {
        let lowered = physical.trim().to_ascii_lowercase();
        let base = lowered
            .split('(')
            .next()
            .unwrap_or_default()
            .trim()
            .trim_end_matches(" unsigned")
            .trim();
        let ty = match base {
            "int" | "integer" | "int4" | "mediumint" | "serial" => CanonicalType::Int,
            "bigint" | "int8" | "bigserial" | "long" => CanonicalType::Bigint,
            "smallint" | "tinyint" | "int2" | "smallserial" => CanonicalType::Smallint,
            "decimal" | "numeric" | "money" | "smallmoney" | "number" => CanonicalType::Decimal,
            "float" | "real" | "double" | "double precision" | "float4" | "float8" => {
                CanonicalType::Float
            }
            "varchar" | "nvarchar" | "char" | "nchar" | "character varying" | "character"
            | "varchar2" | "nvarchar2" | "string" | "bpchar" | "citext" => CanonicalType::Varchar,
            "text" | "ntext" | "clob" | "nclob" | "longtext" | "mediumtext" | "tinytext"
            | "xml" => CanonicalType::Text,
            "date" => CanonicalType::Date,
            "time" | "timetz" | "time without time zone" | "time with time zone" => {
                CanonicalType::Time
            }
            "datetime" | "datetime2" | "smalldatetime" | "timestamp" | "timestamptz"
            | "datetimeoffset" | "timestamp without time zone" | "timestamp with time zone" => {
                CanonicalType::Timestamp
            }
            "bit" | "bool" | "boolean" => CanonicalType::Boolean,
            "uuid" | "uniqueidentifier" | "guid" => CanonicalType::Uuid,
            "binary" | "varbinary" | "blob" | "longblob" | "mediumblob" | "bytea" | "image"
            | "rowversion" => CanonicalType::Binary,
            _ => return (CanonicalType::Other, false),
        };
        (ty, true)
    }

    pub fn is_integer(self) -> bool {
        matches!(
            self,
            CanonicalType::Int | CanonicalType::Bigint | CanonicalType::Smallint
        )
    }

    pub fn is_numeric(self) -> bool {
        self.is_integer() || matches!(self, CanonicalType::Decimal | CanonicalType::Float)
    }

    pub fn is_string(self) -> bool {
        matches!(self, CanonicalType::Varchar | CanonicalType::Text)
    }

    pub fn is_temporal(self) -> bool {
        matches!(
            self,
            CanonicalType::Date | CanonicalType::Time | CanonicalType::Timestamp
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CanonicalType::Int => "INT",
            CanonicalType::Bigint => "BIGINT",
            CanonicalType::Smallint => "SMALLINT",
            CanonicalType::Decimal => "DECIMAL",
            CanonicalType::Float => "FLOAT",
            CanonicalType::Varchar => "VARCHAR",
            CanonicalType::Text => "TEXT",
            CanonicalType::Date => "DATE",
            CanonicalType::Time => "TIME",
            CanonicalType::Timestamp => "TIMESTAMP",
            CanonicalType::Boolean => "BOOLEAN",
            CanonicalType::Uuid => "UUID",
            CanonicalType::Binary => "BINARY",
            CanonicalType::Other => "OTHER",
        }
    }
}

impl fmt::Display for CanonicalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    /// Zero-indexed ordinal position within the table.
    pub ordinal_position: usize,
    pub canonical_type: CanonicalType,
    /// The type string as it appeared in the source catalog.
    pub physical_type: String,
    pub nullable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_expr: Option<String>,
    /// Pre-existing catalog comment, if any. Used only as seed context.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub existing_description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub schema_name: String,
    pub table_name: String,
    pub columns: Vec<ColumnMeta>,
    /// Row count as reported by the catalog; may be an estimate.
    pub row_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub existing_description: Option<String>,
}

impl TableMeta {
    pub fn table_ref(&self) -> TableRef {
        TableRef::new(&self.schema_name, &self.table_name)
    }

    pub fn column(&self, name: &str) -> Option<&ColumnMeta> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Checks unique column names and contiguous zero-based ordinals.
    pub fn validate(&self) -> Result<(), SchemaError> {
        let mut seen = std::collections::BTreeSet::new();
        for (i, col) in self.columns.iter().enumerate() {
            if !seen.insert(col.name.as_str()) {
                return Err(SchemaError::DuplicateColumn {
                    table: self.table_ref().to_string(),
                    column: col.name.clone(),
                });
            }
            if col.ordinal_position != i {
                return Err(SchemaError::NonContiguousOrdinals {
                    table: self.table_ref().to_string(),
                });
            }
        }
        Ok(())
    }
}

/// Where a relationship came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RelationshipOrigin {
    Declared,
    Statistical,
    AnalyzerProposed,
    GroundTruth,
}

/// A foreign-key style edge from a referencing (child) table to a referenced
/// (parent) table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relationship {
    pub source_table: TableRef,
    pub source_columns: Vec<String>,
    pub target_table: TableRef,
    pub target_columns: Vec<String>,
    /// Confidence on the 0..=100 scale used by key scoring.
    pub confidence: f64,
    pub origin: RelationshipOrigin,
}

impl Relationship {
    pub fn single(
        source: &ColumnRef,
        target: &ColumnRef,
        confidence: f64,
        origin: RelationshipOrigin,
    ) -> Self {
        Self {
            source_table: source.table.clone(),
            source_columns: vec![source.column.clone()],
            target_table: target.table.clone(),
            target_columns: vec![target.column.clone()],
            confidence,
            origin,
        }
    }

    pub fn is_self_referencing(&self) -> bool {
        self.source_table == self.target_table
    }

    /// Total order used for deterministic tie-breaking.
    pub fn edge_key(&self) -> (&TableRef, &[String], &TableRef, &[String]) {
        (
            &self.source_table,
            &self.source_columns,
            &self.target_table,
            &self.target_columns,
        )
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.source_columns.is_empty() || self.source_columns.len() != self.target_columns.len()
        {
            return Err(SchemaError::ArityMismatch {
                relationship: self.to_string(),
            });
        }
        if self.is_self_referencing() && self.source_columns == self.target_columns {
            return Err(SchemaError::SelfReferenceOnSameColumns {
                relationship: self.to_string(),
            });
        }
        if !(0.0..=100.0).contains(&self.confidence) {
            return Err(SchemaError::ConfidenceOutOfRange {
                relationship: self.to_string(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for Relationship {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}({}) -> {}({})",
            self.source_table,
            self.source_columns.join(","),
            self.target_table,
            self.target_columns.join(",")
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn physical_type_mapping_table() {
        let cases = [
            ("int", CanonicalType::Int),
            ("INTEGER", CanonicalType::Int),
            ("bigint", CanonicalType::Bigint),
            ("tinyint", CanonicalType::Smallint),
            ("decimal(10,2)", CanonicalType::Decimal),
            ("money", CanonicalType::Decimal),
            ("double precision", CanonicalType::Float),
            ("nvarchar(50)", CanonicalType::Varchar),
            ("character varying(255)", CanonicalType::Varchar),
            ("ntext", CanonicalType::Text),
            ("date", CanonicalType::Date),
            ("time(7)", CanonicalType::Time),
            ("datetime2(3)", CanonicalType::Timestamp),
            ("timestamptz", CanonicalType::Timestamp),
            ("bit", CanonicalType::Boolean),
            ("uniqueidentifier", CanonicalType::Uuid),
            ("uuid", CanonicalType::Uuid),
            ("varbinary(max)", CanonicalType::Binary),
            ("bytea", CanonicalType::Binary),
            ("int unsigned", CanonicalType::Int),
        ];
        for (physical, expected) in cases {
            assert_eq!(
                CanonicalType::from_physical(physical),
                (expected, true),
                "{physical}"
            );
        }
        assert_eq!(
            CanonicalType::from_physical("geography"),
            (CanonicalType::Other, false)
        );
    }

    #[test]
    fn every_canonical_name_maps_back_to_itself() {
        for ty in CanonicalType::ALL {
            if ty == CanonicalType::Other {
                continue;
            }
            assert_eq!(CanonicalType::from_physical(ty.as_str()).0, ty);
        }
    }

    #[test]
    fn object_id_string_form() {
        let t = ObjectId::Table(TableRef::new("dbo", "cst"));
        let c = ObjectId::Column(TableRef::new("dbo", "cst").column("cst.nm"));
        assert_eq!(t.to_string(), "dbo.cst");
        assert_eq!(ObjectId::try_from("dbo.cst".to_string()).unwrap(), t);
        assert_eq!(ObjectId::try_from(c.to_string()).unwrap(), c);
        assert!(ObjectId::try_from("nodot".to_string()).is_err());
    }

    #[test]
    fn table_validation_catches_duplicates_and_gaps() {
        let col = |name: &str, pos| ColumnMeta {
            name: name.into(),
            ordinal_position: pos,
            canonical_type: CanonicalType::Int,
            physical_type: "int".into(),
            nullable: false,
            default_expr: None,
            existing_description: None,
        };
        let mut t = TableMeta {
            schema_name: "dbo".into(),
            table_name: "t".into(),
            columns: vec![col("a", 0), col("b", 1)],
            row_count: 0,
            existing_description: None,
        };
        assert!(t.validate().is_ok());
        t.columns[1].ordinal_position = 2;
        assert!(t.validate().is_err());
        t.columns[1] = col("a", 1);
        assert!(t.validate().is_err());
    }
}
