use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use darkdoc_core::model::{CanonicalType, ColumnMeta, ObjectId, TableMeta, TableRef};
use darkdoc_core::output::{
    emit_csv, emit_mermaid, emit_sql, mermaid_name, parse_sql, DocView, SqlDialect, COLUMNS_CSV_HEADER,
    RELATIONSHIPS_CSV_HEADER, TABLES_CSV_HEADER,
};
use darkdoc_core::refine::DescriptionStore;
use darkdoc_core::run::{self, read_bundle, RunConfig, RunOptions, RunState};
use proptest::prelude::*;
use regex::Regex;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

fn completed(preset: &str) -> (tempfile::TempDir, RunState, BTreeMap<String, String>) {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig {
        snapshot: fixtures().join("fixtures").join(preset).join("manifest.json"),
        output_root: dir.path().join("runs"),
        ..Default::default()
    };
    let out = run::orchestrate(config, &darkdoc_core::analyzer::MockAnalyzer, &RunOptions::default()).unwrap();
    let bundle = read_bundle(&out.run_dir).unwrap();
    (dir, out.state, bundle)
}

fn meta(schema: &str, name: &str, columns: &[String]) -> TableMeta {
    TableMeta {
        schema_name: schema.into(),
        table_name: name.into(),
        columns: columns
            .iter()
            .enumerate()
            .map(|(i, c)| ColumnMeta {
                name: c.clone(),
                ordinal_position: i,
                canonical_type: CanonicalType::Varchar,
                physical_type: "nvarchar(40)".into(),
                nullable: true,
                default_expr: None,
                existing_description: None,
            })
            .collect(),
        row_count: 0,
        existing_description: None,
    }
}

fn identifier() -> impl Strategy<Value = String> {
    "[A-Za-z_][A-Za-z0-9_ \"'\\]\\[]{0,10}"
}

fn description() -> impl Strategy<Value = String> {
    "[A-Za-z0-9 ,.;:'\"\\]\\[()\\-\n\t\u{e9}\u{4e2d}]{1,40}"
        .prop_filter("non-blank", |s| !s.trim().is_empty())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn sql_scripts_round_trip(
        schema in identifier(),
        tables in proptest::collection::btree_map(identifier(), proptest::collection::btree_set(identifier(), 1..4), 1..4),
        texts in proptest::collection::vec(description(), 16),
    ) {
        let metas: Vec<TableMeta> = tables
            .iter()
            .map(|(t, cols)| meta(&schema, t, &cols.iter().cloned().collect::<Vec<_>>()))
            .collect();
        let mut truth = BTreeMap::new();
        let mut next = texts.iter().cycle();
        for m in &metas {
            let tr = m.table_ref();
            truth.insert(ObjectId::Table(tr.clone()), next.next().unwrap().clone());
            for c in &m.columns {
                truth.insert(ObjectId::Column(tr.column(c.name.clone())), next.next().unwrap().clone());
            }
        }
        let mut store = DescriptionStore::new(&metas);
        store.apply_ground_truth(&truth);
        let view = DocView { tables: &metas, store: &store, primary_keys: &BTreeMap::new(), relationships: &[] };
        for dialect in [SqlDialect::AnsiCommentOn, SqlDialect::ExtendedProperties] {
            let script = emit_sql(&view, dialect);
            let parsed = parse_sql(&script).map_err(|e| TestCaseError::fail(format!("{dialect:?}: {e:?}\n{script}")))?;
            prop_assert_eq!(&parsed, &truth, "{:?}", dialect);
        }
    }
}

#[test]
fn sql_parser_rejects_garbage() {
    assert!(parse_sql("COMMENT ON TABLE \"a\".\"b\" IS 'unterminated").is_err());
    assert!(parse_sql("COMMENT ON NOTHING").is_err());
    assert!(parse_sql("-- only a comment\n").unwrap().is_empty());
}

#[test]
fn extended_properties_script_is_rerunnable() {
    let metas = vec![meta("dbo", "t", &["c".into()])];
    let mut store = DescriptionStore::new(&metas);
    store.apply_ground_truth(&BTreeMap::from([(ObjectId::Table(TableRef::new("dbo", "t")), "It's a table".into())]));
    let view = DocView { tables: &metas, store: &store, primary_keys: &BTreeMap::new(), relationships: &[] };
    let script = emit_sql(&view, SqlDialect::ExtendedProperties);
    assert!(script.contains("IF EXISTS"));
    assert!(script.contains("sp_updateextendedproperty"));
    assert!(script.contains("It''s a table"));
    let ansi = emit_sql(&view, SqlDialect::AnsiCommentOn);
    assert_eq!(ansi.matches("COMMENT ON").count(), 1);
}

#[test]
fn mermaid_diagram_reparses_to_the_key_set() {
    let (_dir, state, bundle) = completed("lousy8");
    let erd = &bundle["mermaid/erd.mmd"];
    assert_eq!(erd.lines().next(), Some("erDiagram"));
    let entity = Regex::new(r#"^    (\S+)\["([^"]+)"\] \{$"#).unwrap();
    let attribute = Regex::new(r"^        (\S+) (\S+)(?: (PK|FK|PK, FK))?$").unwrap();
    let edge = Regex::new(r#"^    (\S+) \}o--(\|\||o\|) (\S+) : "([^"]+)"$"#).unwrap();

    let mut entities: BTreeMap<String, String> = BTreeMap::new();
    let mut pk_columns: BTreeSet<(String, String)> = BTreeSet::new();
    let mut edges: BTreeSet<(String, String, String)> = BTreeSet::new();
    let mut current = None;
    for line in erd.lines().skip(1) {
        if let Some(c) = entity.captures(line) {
            entities.insert(c[1].to_string(), c[2].to_string());
            current = Some(c[2].to_string());
        } else if let Some(c) = attribute.captures(line) {
            if c.get(3).is_some_and(|m| m.as_str().starts_with("PK")) {
                pk_columns.insert((current.clone().unwrap(), c[2].to_string()));
            }
        } else if let Some(c) = edge.captures(line) {
            edges.insert((entities[&c[1]].clone(), entities[&c[3]].clone(), c[4].to_string()));
        } else {
            assert!(line.trim() == "}" || line.trim().is_empty(), "unparsed line {line:?}");
        }
    }
    assert_eq!(entities.len(), state.tables.len());
    for (key, name) in &entities {
        let t = TableRef::parse(name);
        assert_eq!(key, &mermaid_name(&format!("{}__{}", t.schema, t.table)));
    }
    let want_pks: BTreeSet<(String, String)> = state
        .primary_keys()
        .into_iter()
        .flat_map(|(t, cols)| cols.into_iter().map(move |c| (t.to_string(), c)))
        .collect();
    assert_eq!(pk_columns, want_pks);
    let want_edges: BTreeSet<(String, String, String)> = state
        .relationships()
        .iter()
        .map(|r| (r.source_table.to_string(), r.target_table.to_string(), r.source_columns.join(", ")))
        .collect();
    assert_eq!(edges, want_edges);
    assert_eq!(emit_mermaid_from(&state), *erd);
}

fn emit_mermaid_from(state: &RunState) -> String {
    let store = state.descriptions();
    let pks = state.primary_keys();
    let rels = state.relationships();
    emit_mermaid(&DocView { tables: &state.tables, store: &store, primary_keys: &pks, relationships: &rels })
}

#[test]
fn csv_exports_have_fixed_headers_and_one_row_per_object() {
    let (_dir, state, bundle) = completed("lousy8");
    let rows = |name: &str, header: &[&str]| {
        let mut r = csv::Reader::from_reader(bundle[name].as_bytes());
        assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), header);
        r.records().map(|x| x.unwrap()).collect::<Vec<_>>()
    };
    assert_eq!(rows("csv/tables.csv", &TABLES_CSV_HEADER).len(), state.tables.len());
    let columns: usize = state.tables.iter().map(|t| t.columns.len()).sum();
    assert_eq!(rows("csv/columns.csv", &COLUMNS_CSV_HEADER).len(), columns);
    assert_eq!(rows("csv/relationships.csv", &RELATIONSHIPS_CSV_HEADER).len(), state.relationships().len());

    let store = state.descriptions();
    let pks = state.primary_keys();
    let rels = state.relationships();
    let view = DocView { tables: &state.tables, store: &store, primary_keys: &pks, relationships: &rels };
    for (name, text) in emit_csv(&view) {
        assert_eq!(bundle[&format!("csv/{name}")], text);
    }
}

#[test]
fn markdown_lists_every_table_once() {
    let (_dir, state, bundle) = completed("chain4");
    let md = &bundle["md/schema.md"];
    for t in &state.tables {
        let heading = format!("### {}", t.table_ref());
        assert_eq!(md.lines().filter(|l| *l == heading).count(), 1, "{heading}");
    }
}

/// Regenerate with `UPDATE_GOLDEN=1 cargo test --test outputs`.
#[test]
fn chain_bundle_matches_golden_files() {
    let (_dir, _state, bundle) = completed("chain4");
    let golden = fixtures().join("golden/chain4");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        for (name, text) in &bundle {
            let path = golden.join(name);
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(path, text).unwrap();
        }
    }
    for (name, text) in &bundle {
        let frozen = std::fs::read_to_string(golden.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(&frozen, text, "{name} differs from the golden copy");
    }
}
