#![no_main]
use darkdoc_core::ingest::parse_table_data;
use darkdoc_core::model::{CanonicalType, ColumnMeta, TableMeta};
use libfuzzer_sys::fuzz_target;

fn column(name: &str, physical: &str, nullable: bool) -> ColumnMeta {
    ColumnMeta {
        name: name.into(),
        ordinal_position: 0,
        canonical_type: CanonicalType::from_physical(physical).0,
        physical_type: physical.into(),
        nullable,
        default_expr: None,
        existing_description: None,
    }
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let mut columns = vec![
        column("id", "int", false),
        column("name", "nvarchar(40)", true),
        column("amount", "decimal(10,2)", true),
    ];
    for (i, c) in columns.iter_mut().enumerate() {
        c.ordinal_position = i;
    }
    let meta = TableMeta {
        schema_name: "dbo".into(),
        table_name: "t".into(),
        columns,
        row_count: 0,
        existing_description: None,
    };
    if let Ok(table) = parse_table_data("dbo.t.csv", text, &meta) {
        let _ = table.row_count();
    }
});
