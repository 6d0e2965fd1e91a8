//! Replays the checked-in fuzz seeds, plus random inputs, through the parser
//! entry points with the same checks the fuzz targets make.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use darkdoc_core::analyzer::templates::substitute;
use darkdoc_core::analyzer::{decode_envelope, decode_response, encode_response, strip_fences, RequestKind};
use darkdoc_core::ingest::{parse_delimited, parse_manifest, parse_table_data, parse_truth, write_delimited};
use darkdoc_core::model::{CanonicalType, ColumnMeta, ObjectId, TableMeta, TableRef};
use darkdoc_core::output::parse_sql;
use darkdoc_core::run::{RunConfig, RunState};
use proptest::prelude::*;

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let bytes = std::fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text(path: &Path, bytes: &[u8]) -> String {
    String::from_utf8(bytes.to_vec()).unwrap_or_else(|_| panic!("{} is not UTF-8", path.display()))
}

fn check_delimited(text: &str) -> bool {
    let Ok(records) = parse_delimited(text) else {
        return false;
    };
    let Some((header, rows)) = records.split_first() else {
        return true;
    };
    let Some(names) = header.iter().map(|c| c.as_deref()).collect::<Option<Vec<&str>>>() else {
        return true;
    };
    let encoded = write_delimited(names.iter().copied(), rows.iter().cloned());
    assert_eq!(parse_delimited(&encoded).expect("encoder output parses"), records);
    true
}

fn table_meta() -> TableMeta {
    let column = |i: usize, name: &str, physical: &str, nullable: bool| ColumnMeta {
        name: name.into(),
        ordinal_position: i,
        canonical_type: CanonicalType::from_physical(physical).0,
        physical_type: physical.into(),
        nullable,
        default_expr: None,
        existing_description: None,
    };
    TableMeta {
        schema_name: "dbo".into(),
        table_name: "t".into(),
        columns: vec![
            column(0, "id", "int", false),
            column(1, "name", "nvarchar(40)", true),
            column(2, "amount", "decimal(10,2)", true),
        ],
        row_count: 0,
        existing_description: None,
    }
}

fn check_response(data: &[u8]) -> bool {
    let Some((&selector, body)) = data.split_first() else {
        return false;
    };
    let Ok(body) = std::str::from_utf8(body) else {
        return false;
    };
    let kind = RequestKind::ALL[selector as usize % RequestKind::ALL.len()];
    let content = match decode_envelope(body) {
        Ok((content, _)) => content,
        Err(_) => body.to_string(),
    };
    match decode_response(kind, strip_fences(&content)) {
        Ok(payload) => {
            let again = decode_response(kind, &encode_response(&payload)).expect("encoded payload decodes");
            assert_eq!(again, payload);
            true
        }
        Err(_) => false,
    }
}

fn check_template(template: &str) {
    let vars = BTreeMap::from([
        ("seed_context", "retail".to_string()),
        ("context", "{\"table\": \"dbo.t\"}".to_string()),
        ("response_schema", "{}".to_string()),
    ]);
    let rendered = substitute(template, &vars);
    if !template.contains("{{") {
        assert_eq!(rendered.as_deref().ok(), Some(template));
    }
}

fn check_object_id(text: &str) -> bool {
    let _ = TableRef::parse(text);
    match ObjectId::try_from(text.to_string()) {
        Ok(id) => {
            assert_eq!(ObjectId::try_from(id.to_string()).expect("rendered id parses"), id);
            true
        }
        Err(_) => false,
    }
}

#[test]
fn delimited_seeds_parse_and_round_trip() {
    for (p, b) in seeds("delimited") {
        assert!(check_delimited(&text(&p, &b)), "{}", p.display());
    }
}

#[test]
fn manifest_and_truth_seeds_parse() {
    for (p, b) in seeds("manifest") {
        parse_manifest(&text(&p, &b)).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, b) in seeds("truth") {
        parse_truth(&text(&p, &b)).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

#[test]
fn table_data_seeds_parse() {
    let meta = table_meta();
    for (p, b) in seeds("table_data") {
        parse_table_data("dbo.t.csv", &text(&p, &b), &meta).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

#[test]
fn config_and_state_seeds_round_trip() {
    for (p, b) in seeds("run_config") {
        let config = RunConfig::parse(&text(&p, &b)).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        let again = RunConfig::parse(&serde_json::to_string(&config).unwrap()).unwrap();
        assert_eq!(again.digest(), config.digest());
    }
    for (p, b) in seeds("run_state") {
        let state = RunState::from_json(&text(&p, &b)).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        let once = state.to_json();
        assert_eq!(RunState::from_json(&once).unwrap().to_json(), once);
    }
}

#[test]
fn analyzer_response_seeds_decode() {
    for (p, b) in seeds("analyzer_response") {
        assert!(check_response(&b), "{}", p.display());
    }
}

#[test]
fn sql_seeds_parse() {
    for (p, b) in seeds("sql_comments") {
        let parsed = parse_sql(&text(&p, &b)).unwrap_or_else(|e| panic!("{}: {e:?}", p.display()));
        assert!(!parsed.is_empty());
    }
}

#[test]
fn template_and_object_id_seeds() {
    for (p, b) in seeds("template") {
        check_template(&text(&p, &b));
    }
    for (p, b) in seeds("object_id") {
        assert!(check_object_id(&text(&p, &b)), "{}", p.display());
    }
}

proptest! {
    #[test]
    fn delimited_never_panics(s in "[a-z0-9,\"\r\n ]{0,60}") {
        check_delimited(&s);
        let _ = parse_table_data("dbo.t.csv", &s, &table_meta());
    }

    #[test]
    fn decoders_never_panic(s in "\\PC{0,80}", k in any::<u8>()) {
        let mut data = vec![k];
        data.extend_from_slice(s.as_bytes());
        check_response(&data);
        check_template(&s);
        check_object_id(&s);
        let _ = parse_sql(&s);
        let _ = parse_manifest(&s);
        let _ = parse_truth(&s);
        let _ = RunConfig::parse(&s);
        let _ = RunState::from_json(&s);
    }

    #[test]
    fn sql_fragments_never_panic(s in "(COMMENT ON |TABLE |COLUMN |IS |EXEC |N?'[a-z']{0,4}'|\"[a-z.]{0,4}\"|\\[[a-z\\]]{0,3}\\]|[.;,() \n])*") {
        let _ = parse_sql(&s);
    }
}
