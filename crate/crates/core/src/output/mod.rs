//! Documentation artifacts rendered from a finished run.

mod sql;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::model::{ObjectId, Relationship, RelationshipOrigin, TableMeta, TableRef};
use crate::refine::DescriptionStore;

pub use sql::{emit_sql, parse_sql, SqlDialect, SqlParseError};

pub const UNDOCUMENTED: &str = "_undocumented_";

/// Everything the renderers read.
#[derive(Debug, Clone, Copy)]
pub struct DocView<'a> {
    pub tables: &'a [TableMeta],
    pub store: &'a DescriptionStore,
    pub primary_keys: &'a BTreeMap<TableRef, Vec<String>>,
    pub relationships: &'a [Relationship],
}

impl<'a> DocView<'a> {
    fn sorted_tables(&self) -> Vec<&'a TableMeta> {
        let mut v: Vec<&TableMeta> = self.tables.iter().collect();
        v.sort_by_key(|t| t.table_ref());
        v
    }

    fn sorted_relationships(&self) -> Vec<&'a Relationship> {
        let mut v: Vec<&Relationship> = self.relationships.iter().collect();
        v.sort_by(|a, b| a.edge_key().cmp(&b.edge_key()));
        v
    }

    fn pk(&self, t: &TableRef) -> &[String] {
        self.primary_keys.get(t).map_or(&[], Vec::as_slice)
    }

    fn fk_columns(&self, t: &TableRef) -> BTreeSet<&'a str> {
        self.relationships
            .iter()
            .filter(|r| &r.source_table == t)
            .flat_map(|r| r.source_columns.iter().map(String::as_str))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct OutputToggles {
    pub sql: bool,
    pub sql_dialects: Vec<SqlDialect>,
    pub markdown: bool,
    pub mermaid: bool,
    pub csv: bool,
    pub metrics: bool,
}

impl Default for OutputToggles {
    fn default() -> Self {
        Self {
            sql: true,
            sql_dialects: vec![SqlDialect::AnsiCommentOn, SqlDialect::ExtendedProperties],
            markdown: true,
            mermaid: true,
            csv: true,
            metrics: true,
        }
    }
}

/// Renders every enabled artifact, keyed by path relative to the outputs
/// directory.
pub fn emit_bundle(view: &DocView<'_>, metrics: &str, toggles: &OutputToggles) -> BTreeMap<String, String> {
    let mut files = BTreeMap::new();
    if toggles.sql {
        for d in &toggles.sql_dialects {
            files.insert(format!("sql/{}", d.file_name()), emit_sql(view, *d));
        }
    }
    if toggles.markdown {
        files.insert("md/schema.md".into(), emit_markdown(view));
    }
    if toggles.mermaid {
        files.insert("mermaid/erd.mmd".into(), emit_mermaid(view));
    }
    if toggles.csv {
        for (name, text) in emit_csv(view) {
            files.insert(format!("csv/{name}"), text);
        }
    }
    if toggles.metrics {
        files.insert("metrics/metrics.json".into(), metrics.to_string());
    }
    files
}

/// Mermaid identifiers allow letters, digits, `_` and `-`.
pub fn mermaid_name(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect()
}

fn entity(t: &TableRef) -> String {
    mermaid_name(&format!("{}__{}", t.schema, t.table))
}

pub fn emit_mermaid(view: &DocView<'_>) -> String {
    let mut out = String::from("erDiagram\n");
    for t in view.sorted_tables() {
        let tr = t.table_ref();
        let pk = view.pk(&tr);
        let fks = view.fk_columns(&tr);
        let _ = writeln!(out, "    {}[\"{}\"] {{", entity(&tr), tr);
        for c in &t.columns {
            let mut keys = Vec::new();
            if pk.contains(&c.name) {
                keys.push("PK");
            }
            if fks.contains(c.name.as_str()) {
                keys.push("FK");
            }
            let _ = writeln!(
                out,
                "        {} {}{}{}",
                c.canonical_type.as_str().to_lowercase(),
                mermaid_name(&c.name),
                if keys.is_empty() { "" } else { " " },
                keys.join(", ")
            );
        }
        out.push_str("    }\n");
    }
    for r in view.sorted_relationships() {
        let optional = view
            .tables
            .iter()
            .find(|t| t.table_ref() == r.source_table)
            .is_some_and(|t| r.source_columns.iter().any(|c| t.column(c).is_some_and(|m| m.nullable)));
        let _ = writeln!(
            out,
            "    {} }}o--{} {} : \"{}\"",
            entity(&r.source_table),
            if optional { "o|" } else { "||" },
            entity(&r.target_table),
            r.source_columns.join(", ").replace('"', "'")
        );
    }
    out
}

/// GitHub-style heading anchor.
pub fn anchor(heading: &str) -> String {
    heading
        .to_lowercase()
        .chars()
        .filter_map(|c| match c {
            ' ' => Some('-'),
            c if c.is_alphanumeric() || c == '-' || c == '_' => Some(c),
            _ => None,
        })
        .collect()
}

fn cell(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .replace('|', "\\|")
}

fn described(text: &str) -> String {
    if text.trim().is_empty() {
        UNDOCUMENTED.to_string()
    } else {
        cell(text)
    }
}

pub fn emit_markdown(view: &DocView<'_>) -> String {
    let tables = view.sorted_tables();
    let mut schemas: BTreeMap<&str, Vec<&TableMeta>> = BTreeMap::new();
    for t in &tables {
        schemas.entry(&t.schema_name).or_default().push(t);
    }
    let mut out = String::from("# Schema documentation\n\n## Contents\n\n");
    for (schema, ts) in &schemas {
        let _ = writeln!(out, "- [{schema}](#{})", anchor(&format!("Schema {schema}")));
        for t in ts {
            let name = t.table_ref().to_string();
            let _ = writeln!(out, "  - [{name}](#{})", anchor(&name));
        }
    }
    for (schema, ts) in &schemas {
        let _ = write!(out, "\n## Schema {schema}\n");
        for t in ts {
            let tr = t.table_ref();
            let _ = write!(
                out,
                "\n### {tr}\n\n{}\n\nRows: {}\n\n| Column | Type | Nullable | Key | Description |\n|---|---|---|---|---|\n",
                described(view.store.text(&ObjectId::Table(tr.clone()))),
                t.row_count
            );
            let pk = view.pk(&tr);
            let fks = view.fk_columns(&tr);
            for c in &t.columns {
                let mut keys = Vec::new();
                if pk.contains(&c.name) {
                    keys.push("PK");
                }
                if fks.contains(c.name.as_str()) {
                    keys.push("FK");
                }
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} | {} |",
                    cell(&c.name),
                    c.canonical_type.as_str(),
                    if c.nullable { "yes" } else { "no" },
                    keys.join(", "),
                    described(view.store.text(&ObjectId::Column(tr.column(c.name.clone()))))
                );
            }
            let outgoing: Vec<_> = view.sorted_relationships().into_iter().filter(|r| r.source_table == tr).collect();
            let incoming: Vec<_> = view
                .sorted_relationships()
                .into_iter()
                .filter(|r| r.target_table == tr && r.source_table != tr)
                .collect();
            out.push_str("\nRelationships:\n\n");
            if outgoing.is_empty() && incoming.is_empty() {
                out.push_str("- none\n");
            }
            for r in outgoing {
                let _ = writeln!(
                    out,
                    "- `{}` references `{}.{}` ({}, confidence {:.1})",
                    r.source_columns.join(", "),
                    r.target_table,
                    r.target_columns.join(", "),
                    origin_label(r.origin),
                    r.confidence
                );
            }
            for r in incoming {
                let _ = writeln!(
                    out,
                    "- referenced by `{}.{}`",
                    r.source_table,
                    r.source_columns.join(", ")
                );
            }
        }
    }
    out
}

fn origin_label(o: RelationshipOrigin) -> &'static str {
    match o {
        RelationshipOrigin::Declared => "declared",
        RelationshipOrigin::Statistical => "statistical",
        RelationshipOrigin::AnalyzerProposed => "analyzer proposed",
        RelationshipOrigin::GroundTruth => "ground truth",
    }
}

pub const TABLES_CSV_HEADER: [&str; 7] = [
    "schema",
    "table",
    "row_count",
    "primary_key",
    "description",
    "confidence",
    "ground_truth",
];
pub const COLUMNS_CSV_HEADER: [&str; 11] = [
    "schema",
    "table",
    "column",
    "ordinal",
    "type",
    "nullable",
    "primary_key",
    "references",
    "description",
    "confidence",
    "ground_truth",
];
pub const RELATIONSHIPS_CSV_HEADER: [&str; 8] = [
    "source_schema",
    "source_table",
    "source_columns",
    "target_schema",
    "target_table",
    "target_columns",
    "confidence",
    "origin",
];

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// `tables.csv`, `columns.csv` and `relationships.csv`.
pub fn emit_csv(view: &DocView<'_>) -> BTreeMap<&'static str, String> {
    let record = |id: ObjectId| {
        let r = view.store.get(&id);
        (
            r.map_or(String::new(), |r| r.text.clone()),
            r.map_or("0.00".into(), |r| format!("{:.2}", r.confidence)),
            r.is_some_and(|r| r.immutable).to_string(),
        )
    };
    let mut tables = Vec::new();
    let mut columns = Vec::new();
    for t in view.sorted_tables() {
        let tr = t.table_ref();
        let (text, conf, gt) = record(ObjectId::Table(tr.clone()));
        let pk = view.pk(&tr);
        tables.push(vec![
            tr.schema.clone(),
            tr.table.clone(),
            t.row_count.to_string(),
            pk.join("+"),
            text,
            conf,
            gt,
        ]);
        for c in &t.columns {
            let (text, conf, gt) = record(ObjectId::Column(tr.column(c.name.clone())));
            let references: Vec<String> = view
                .sorted_relationships()
                .into_iter()
                .filter(|r| r.source_table == tr && r.source_columns.contains(&c.name))
                .map(|r| format!("{}.{}", r.target_table, r.target_columns.join("+")))
                .collect();
            columns.push(vec![
                tr.schema.clone(),
                tr.table.clone(),
                c.name.clone(),
                c.ordinal_position.to_string(),
                c.canonical_type.as_str().to_string(),
                c.nullable.to_string(),
                pk.contains(&c.name).to_string(),
                references.join(";"),
                text,
                conf,
                gt,
            ]);
        }
    }
    let relationships = view
        .sorted_relationships()
        .into_iter()
        .map(|r| {
            vec![
                r.source_table.schema.clone(),
                r.source_table.table.clone(),
                r.source_columns.join("+"),
                r.target_table.schema.clone(),
                r.target_table.table.clone(),
                r.target_columns.join("+"),
                format!("{:.2}", r.confidence),
                serde_json::to_value(r.origin)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default(),
            ]
        })
        .collect();
    BTreeMap::from([
        ("tables.csv", csv_text(&TABLES_CSV_HEADER, tables)),
        ("columns.csv", csv_text(&COLUMNS_CSV_HEADER, columns)),
        ("relationships.csv", csv_text(&RELATIONSHIPS_CSV_HEADER, relationships)),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CanonicalType, ColumnMeta};
    use crate::refine::EntrySource;

    fn col(name: &str, pos: usize, nullable: bool) -> ColumnMeta {
        ColumnMeta {
            name: name.into(),
            ordinal_position: pos,
            canonical_type: CanonicalType::Int,
            physical_type: "int".into(),
            nullable,
            default_expr: None,
            existing_description: None,
        }
    }

    fn tables() -> Vec<TableMeta> {
        let t = |name: &str, cols: Vec<ColumnMeta>| TableMeta {
            schema_name: "dbo".into(),
            table_name: name.into(),
            columns: cols,
            row_count: 3,
            existing_description: None,
        };
        vec![
            t("emp", vec![col("emp_id", 0, false), col("mgr_id", 1, true), col("dept_id", 2, false)]),
            t("dept", vec![col("dept_id", 0, false)]),
        ]
    }

    fn rels() -> Vec<Relationship> {
        let emp = TableRef::new("dbo", "emp");
        let dept = TableRef::new("dbo", "dept");
        vec![
            Relationship::single(&emp.column("dept_id"), &dept.column("dept_id"), 100.0, RelationshipOrigin::Statistical),
            Relationship::single(&emp.column("mgr_id"), &emp.column("emp_id"), 96.0, RelationshipOrigin::Statistical),
        ]
    }

    #[test]
    fn mermaid_has_entities_and_edges() {
        let ts = tables();
        let store = DescriptionStore::new(&ts);
        let pks = BTreeMap::from([(TableRef::new("dbo", "emp"), vec!["emp_id".to_string()])]);
        let rs = rels();
        let view = DocView {
            tables: &ts,
            store: &store,
            primary_keys: &pks,
            relationships: &rs,
        };
        let m = emit_mermaid(&view);
        assert!(m.contains("dbo__emp[\"dbo.emp\"] {"));
        assert!(m.contains("        int emp_id PK\n"));
        assert!(m.contains("    dbo__emp }o--|| dbo__dept : \"dept_id\"\n"));
        assert!(m.contains("    dbo__emp }o--o| dbo__emp : \"mgr_id\"\n"));
    }

    #[test]
    fn markdown_marks_gaps_and_lists_contents() {
        let ts = tables();
        let mut store = DescriptionStore::new(&ts);
        store.update(
            &ObjectId::Table(TableRef::new("dbo", "emp")),
            1,
            "Staff | people",
            0.9,
            "",
            EntrySource::Analysis,
        );
        let pks = BTreeMap::new();
        let rs = rels();
        let view = DocView {
            tables: &ts,
            store: &store,
            primary_keys: &pks,
            relationships: &rs,
        };
        let md = emit_markdown(&view);
        assert!(md.contains("- [dbo.emp](#dboemp)"));
        assert!(md.contains("### dbo.dept\n\n_undocumented_\n"));
        assert!(md.contains("Staff \\| people"));
        assert!(md.contains("- referenced by `dbo.emp.dept_id`"));
    }

    #[test]
    fn csv_headers_are_fixed() {
        let ts = tables();
        let store = DescriptionStore::new(&ts);
        let pks = BTreeMap::new();
        let rs = rels();
        let view = DocView {
            tables: &ts,
            store: &store,
            primary_keys: &pks,
            relationships: &rs,
        };
        let files = emit_csv(&view);
        assert!(files["tables.csv"].starts_with("schema,table,row_count,primary_key,"));
        assert_eq!(files["relationships.csv"].lines().count(), 3);
        assert_eq!(files["columns.csv"].lines().count(), 5);
    }

    #[test]
    fn anchors() {
        assert_eq!(anchor("dbo.Order Details"), "dboorder-details");
        assert_eq!(anchor("Schema dbo"), "schema-dbo");
    }
}
