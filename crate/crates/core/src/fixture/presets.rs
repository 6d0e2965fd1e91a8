use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{column, table, Defect, Fixture, FixtureShape, FixtureSpec, NamingStyle};
use crate::ingest::{Cell, TableData, TruthFile, TruthForeignKey, TruthPrimaryKey, MANIFEST_VERSION};
use crate::model::{TableMeta, TableRef};

pub const PRESETS: [&str; 3] = ["lousy8", "chain4", "nopk"];

/// The canonical acceptance schema: cryptic names, every defect planted.
pub fn lousy8() -> FixtureSpec {
    FixtureSpec {
        name: "lousy8".into(),
        seed: 7,
        shape: FixtureShape::Sales,
        table_count: 8,
        depth: 3,
        naming: NamingStyle::Cryptic,
        defects: Defect::ALL.to_vec(),
    }
}

pub fn chain4() -> FixtureSpec {
    FixtureSpec {
        name: "chain4".into(),
        seed: 11,
        shape: FixtureShape::Chain,
        table_count: 4,
        depth: 4,
        naming: NamingStyle::Clean,
        defects: Vec::new(),
    }
}

pub fn nopk() -> FixtureSpec {
    FixtureSpec {
        name: "nopk".into(),
        seed: 13,
        shape: FixtureShape::CodeKeyed,
        table_count: 4,
        depth: 2,
        naming: NamingStyle::Cryptic,
        defects: Vec::new(),
    }
}

const SCHEMA: &str = "dbo";

fn s(v: impl ToString) -> Cell {
    Some(v.to_string())
}

fn seq(from: usize, n: usize) -> Vec<Cell> {
    (from..from + n).map(s).collect()
}

fn labels(prefix: &str, n: usize) -> Vec<Cell> {
    (1..=n).map(|i| s(format!("{prefix} {i:03}"))).collect()
}

fn codes(prefix: &str, n: usize) -> Vec<Cell> {
    (1..=n).map(|i| s(format!("{prefix}{i:03}"))).collect()
}

fn uuid(rng: &mut ChaCha8Rng) -> String {
    let mut bytes = [0u8; 16];
    rng.fill_bytes(&mut bytes);
    uuid::Builder::from_random_bytes(bytes).into_uuid().to_string()
}

fn money(rng: &mut ChaCha8Rng, lo: u32, hi: u32) -> Cell {
    let cents = rng.random_range(lo * 100..hi * 100);
    s(format!("{}.{:02}", cents / 100, cents % 100))
}

fn date(rng: &mut ChaCha8Rng, year: i32) -> Cell {
    s(format!(
        "{year}-{:02}-{:02}",
        rng.random_range(1..=12u32),
        rng.random_range(1..=28u32)
    ))
}

fn picks(rng: &mut ChaCha8Rng, n: usize, lo: usize, hi: usize) -> Vec<Cell> {
    (0..n).map(|_| s(rng.random_range(lo..=hi))).collect()
}

/// `n` values drawn from `pool` such that every pool member occurs at least
/// once.
fn covering(rng: &mut ChaCha8Rng, pool: &[usize], n: usize) -> Vec<Cell> {
    assert!(n >= pool.len());
    let mut v: Vec<usize> = pool.to_vec();
    while v.len() < n {
        v.push(pool[rng.random_range(0..pool.len())]);
    }
    v.shuffle(rng);
    v.into_iter().map(s).collect()
}

fn pk(t: &str, cols: &[&str]) -> TruthPrimaryKey {
    TruthPrimaryKey {
        table: format!("{SCHEMA}.{t}"),
        columns: cols.iter().map(|c| c.to_string()).collect(),
    }
}

fn fk(st: &str, sc: &str, tt: &str, tc: &str) -> TruthForeignKey {
    TruthForeignKey {
        source_table: format!("{SCHEMA}.{st}"),
        source_column: sc.into(),
        target_table: format!("{SCHEMA}.{tt}"),
        target_column: tc.into(),
    }
}

fn assemble(
    spec: &FixtureSpec,
    parts: Vec<(TableMeta, TableData)>,
    primary_keys: Vec<TruthPrimaryKey>,
    foreign_keys: Vec<TruthForeignKey>,
) -> Fixture {
    let mut tables = Vec::new();
    let mut data = BTreeMap::new();
    for (meta, rows) in parts {
        data.insert(meta.table_ref(), rows);
        tables.push(meta);
    }
    tables.sort_by_key(TableMeta::table_ref);
    let fixture = Fixture {
        spec: spec.clone(),
        tables,
        data,
        truth: TruthFile {
            format_version: MANIFEST_VERSION.to_string(),
            primary_keys,
            foreign_keys,
        },
    };
    match spec.naming {
        NamingStyle::Cryptic => fixture,
        NamingStyle::Clean => expand_names(fixture),
    }
}

use crate::lexicon::expand_identifier as expand;

fn expand_names(mut f: Fixture) -> Fixture {
    let mut data = BTreeMap::new();
    for t in &mut f.tables {
        let old = t.table_ref();
        t.table_name = expand(&t.table_name);
        for c in &mut t.columns {
            c.name = expand(&c.name);
        }
        data.insert(t.table_ref(), f.data.remove(&old).expect("table data"));
    }
    f.tables.sort_by_key(TableMeta::table_ref);
    f.data = data;
    let table = |q: &str| {
        let t = TableRef::parse(q);
        format!("{}.{}", t.schema, expand(&t.table))
    };
    for p in &mut f.truth.primary_keys {
        p.table = table(&p.table);
        p.columns = p.columns.iter().map(|c| expand(c)).collect();
    }
    for k in &mut f.truth.foreign_keys {
        k.source_table = table(&k.source_table);
        k.target_table = table(&k.target_table);
        k.source_column = expand(&k.source_column);
        k.target_column = expand(&k.target_column);
    }
    f
}

pub(super) fn sales(spec: &FixtureSpec) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut parts = Vec::new();

    let n_rgn = 50;
    let tax: Vec<Cell> = (0..n_rgn)
        .map(|_| s(format!("0.{:04}", rng.random_range(100..1200u32))))
        .collect();
    parts.push(table(
        SCHEMA,
        "rgn",
        vec![
            (column("id", "int", false), seq(1, n_rgn)),
            (column("rgn_nm", "nvarchar(40)", false), labels("Region", n_rgn)),
            (column("tax_rt", "decimal(5,4)", false), tax),
        ],
    ));

    let n_cat = 60;
    let roots = 8;
    let parent: Vec<Cell> = (1..=n_cat)
        .map(|i| if i <= roots { None } else { s(rng.random_range(1..=roots)) })
        .collect();
    parts.push(table(
        SCHEMA,
        "cat",
        vec![
            (column("id", "int", false), seq(1, n_cat)),
            (column("cat_nm", "nvarchar(40)", false), labels("Category", n_cat)),
            (column("parent_cat_id", "int", true), parent),
        ],
    ));

    let n_sup = 50;
    let sup_ids: Vec<String> = (0..n_sup).map(|_| uuid(&mut rng)).collect();
    let sup_guids: Vec<String> = (0..n_sup).map(|_| uuid(&mut rng)).collect();
    let mut sup_cols = vec![
        (
            column("sup_id", "uniqueidentifier", false),
            sup_ids.iter().map(s).collect(),
        ),
        (column("sup_nm", "nvarchar(60)", false), labels("Supplier", n_sup)),
        (
            column("contact_email", "varchar(120)", false),
            (1..=n_sup).map(|i| s(format!("sales{i:02}@vendor{i:02}.example.com"))).collect(),
        ),
    ];
    if spec.has(Defect::RowguidTarget) {
        sup_cols.push((
            column("rowguid", "uniqueidentifier", false),
            sup_guids.iter().map(s).collect(),
        ));
    }
    parts.push(table(SCHEMA, "sup", sup_cols));

    let n_emp = 80;
    let mgr: Vec<Cell> = (1..=n_emp)
        .map(|i| if i == 1 { None } else { s(rng.random_range(1..i.min(11))) })
        .collect();
    let hire: Vec<Cell> = (0..n_emp).map(|_| date(&mut rng, 2016)).collect();
    parts.push(table(
        SCHEMA,
        "emp",
        vec![
            (column("emp_id", "int", false), seq(1, n_emp)),
            (column("emp_nm", "nvarchar(60)", false), labels("Employee", n_emp)),
            (column("hire_dt", "date", false), hire),
            (column("mgr_emp_id", "int", true), mgr),
        ],
    ));

    let n_cst = 200;
    let mut cst_cd = codes("C", n_cst);
    if spec.has(Defect::NullPkViolation) {
        cst_cd[16] = None;
    }
    let limits: Vec<Cell> = (0..n_cst).map(|_| money(&mut rng, 500, 20_000)).collect();
    let mut cst_cols = vec![
        (column("cst_id", "int", false), seq(1, n_cst)),
        (column("rgn_id", "int", false), picks(&mut rng, n_cst, 1, n_rgn)),
        (column("cst_nm", "nvarchar(80)", false), labels("Customer", n_cst)),
        (column("cst_cd", "varchar(10)", true), cst_cd),
        (column("crd_lmt", "money", false), limits),
    ];
    if spec.has(Defect::UniqueNonPkAtLatePosition) {
        cst_cols.push((column("legacy_id", "int", false), seq(5001, n_cst)));
    }
    parts.push(table(SCHEMA, "cst", cst_cols));

    let n_prd = 150;
    let supplier_of: Vec<usize> = (0..n_prd).map(|_| rng.random_range(0..n_sup)).collect();
    let mut prd_cols = vec![
        (column("prd_id", "int", false), seq(1, n_prd)),
        (column("cat_id", "int", false), picks(&mut rng, n_prd, roots + 1, n_cat)),
    ];
    if spec.has(Defect::TwoUniqueColumns) {
        prd_cols.push((column("sku_id", "int", false), seq(9001, n_prd)));
    }
    prd_cols.push((
        column("sup_id", "uniqueidentifier", false),
        supplier_of.iter().map(|&i| s(&sup_ids[i])).collect(),
    ));
    if spec.has(Defect::RowguidTarget) {
        prd_cols.push((
            column("sup_rowguid", "uniqueidentifier", false),
            supplier_of.iter().map(|&i| s(&sup_guids[i])).collect(),
        ));
    }
    prd_cols.push((column("prd_nm", "nvarchar(80)", false), labels("Product", n_prd)));
    let prices: Vec<Cell> = (0..n_prd).map(|_| money(&mut rng, 2, 400)).collect();
    prd_cols.push((column("list_price", "decimal(10,2)", false), prices));
    parts.push(table(SCHEMA, "prd", prd_cols));

    let n_ord = 400;
    let emp_ids = if spec.has(Defect::OrphanRows20pct) {
        // 55 real employees plus 15 ids that exist nowhere: 15/70 orphans
        let mut real: Vec<usize> = (1..=n_emp).collect();
        real.shuffle(&mut rng);
        let mut pool: Vec<usize> = real.into_iter().take(55).collect();
        pool.extend(n_emp + 1..=n_emp + 15);
        pool.sort_unstable();
        covering(&mut rng, &pool, n_ord)
    } else {
        picks(&mut rng, n_ord, 1, n_emp)
    };
    let mut ord_cols = vec![
        (column("ord_id", "int", false), seq(1, n_ord)),
        (column("cst_id", "int", false), picks(&mut rng, n_ord, 1, n_cst)),
        (column("emp_id", "int", false), emp_ids),
        (column("ord_dt", "datetime2", false), (0..n_ord).map(|_| date(&mut rng, 2023)).collect()),
    ];
    if spec.has(Defect::CoincidentalOverlapBelow75) {
        // seven of ten distinct values exist in rgn.id
        let pool = [1, 2, 3, 4, 5, 6, 7, n_rgn + 1, n_rgn + 2, n_rgn + 3];
        ord_cols.push((column("old_rgn_id", "int", true), covering(&mut rng, &pool, n_ord)));
    }
    ord_cols.push((
        column("total_amt", "decimal(12,2)", false),
        (0..n_ord).map(|_| money(&mut rng, 10, 5000)).collect(),
    ));
    parts.push(table(SCHEMA, "ord", ord_cols));

    let (mut inv, mut ln, mut prd, mut qty, mut price) = (vec![], vec![], vec![], vec![], vec![]);
    let mut first_lines: Vec<usize> = Vec::new();
    let mut inv_no = 0;
    while inv.len() < 450 {
        inv_no += 1;
        let lines = rng.random_range(1..=5usize).max(if inv_no == 1 { 2 } else { 1 }).min(500 - inv.len());
        let mut used: Vec<usize> = Vec::new();
        for l in 1..=lines {
            let mut p = rng.random_range(1..=n_prd);
            while used.contains(&p) {
                p = rng.random_range(1..=n_prd);
            }
            // repeated products keep (inv_no, prd_id) and (ln_no, prd_id) non-unique
            if inv_no == 1 && l == 2 {
                p = used[0];
            }
            if inv_no == 2 && l == 1 {
                p = first_lines[0];
            }
            used.push(p);
            if l == 1 {
                first_lines.push(p);
            }
            inv.push(s(inv_no));
            ln.push(s(l));
            prd.push(s(p));
            qty.push(s(rng.random_range(1..=20u32)));
            price.push(money(&mut rng, 2, 400));
        }
    }
    parts.push(table(
        SCHEMA,
        "inv_ln",
        vec![
            (column("inv_no", "int", false), inv),
            (column("ln_no", "smallint", false), ln),
            (column("prd_id", "int", false), prd),
            (column("qty", "int", false), qty),
            (column("unit_price", "decimal(10,2)", false), price),
        ],
    ));

    let primary_keys = vec![
        pk("cat", &["id"]),
        pk("cst", &["cst_id"]),
        pk("emp", &["emp_id"]),
        pk("inv_ln", &["inv_no", "ln_no"]),
        pk("ord", &["ord_id"]),
        pk("prd", &["prd_id"]),
        pk("rgn", &["id"]),
        pk("sup", &["sup_id"]),
    ];
    let foreign_keys = vec![
        fk("cat", "parent_cat_id", "cat", "id"),
        fk("cst", "rgn_id", "rgn", "id"),
        fk("emp", "mgr_emp_id", "emp", "emp_id"),
        fk("inv_ln", "prd_id", "prd", "prd_id"),
        fk("ord", "cst_id", "cst", "cst_id"),
        fk("ord", "emp_id", "emp", "emp_id"),
        fk("prd", "cat_id", "cat", "id"),
        fk("prd", "sup_id", "sup", "sup_id"),
    ];
    assemble(spec, parts, primary_keys, foreign_keys)
}

pub(super) fn chain(spec: &FixtureSpec) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n_region, n_customer, n_order, n_line) = (50, 200, 400, 500);
    let jurisdictions = ["US-TX", "US-CA", "US-NY", "US-WA", "CA-ON", "DE-BY"];
    let parts = vec![
        table(
            SCHEMA,
            "region",
            vec![
                (column("region_id", "int", false), seq(1, n_region)),
                (column("region_name", "nvarchar(40)", false), labels("Region", n_region)),
            ],
        ),
        table(
            SCHEMA,
            "customer",
            vec![
                (column("customer_id", "int", false), seq(1, n_customer)),
                (column("region_id", "int", false), picks(&mut rng, n_customer, 1, n_region)),
                (column("credit_limit", "money", false), (0..n_customer).map(|_| money(&mut rng, 500, 9000)).collect()),
            ],
        ),
        table(
            SCHEMA,
            "sales_order",
            vec![
                (column("sales_order_id", "int", false), seq(1, n_order)),
                (column("customer_id", "int", false), picks(&mut rng, n_order, 1, n_customer)),
                (column("order_date", "date", false), (0..n_order).map(|_| date(&mut rng, 2024)).collect()),
            ],
        ),
        table(
            SCHEMA,
            "order_line",
            vec![
                (column("order_line_id", "int", false), seq(1, n_line)),
                (
                    column("tax_jurisdiction", "varchar(8)", false),
                    (0..n_line)
                        .map(|_| s(jurisdictions[rng.random_range(0..jurisdictions.len())]))
                        .collect(),
                ),
                (column("sales_order_id", "int", false), picks(&mut rng, n_line, 1, n_order)),
                (column("quantity", "int", false), picks(&mut rng, n_line, 1, 12)),
            ],
        ),
    ];
    let primary_keys = vec![
        pk("customer", &["customer_id"]),
        pk("order_line", &["order_line_id"]),
        pk("region", &["region_id"]),
        pk("sales_order", &["sales_order_id"]),
    ];
    let foreign_keys = vec![
        fk("customer", "region_id", "region", "region_id"),
        fk("order_line", "sales_order_id", "sales_order", "sales_order_id"),
        fk("sales_order", "customer_id", "customer", "customer_id"),
    ];
    assemble(spec, parts, primary_keys, foreign_keys)
}

pub(super) fn code_keyed(spec: &FixtureSpec) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n_parent, n_shp) = (50, 400);
    let pick_codes = |rng: &mut ChaCha8Rng, prefix: &str| -> Vec<Cell> {
        (0..n_shp)
            .map(|_| s(format!("{prefix}{:03}", rng.random_range(1..=n_parent))))
            .collect()
    };
    let wh = pick_codes(&mut rng, "W");
    let carrier = pick_codes(&mut rng, "CR");
    let zone = pick_codes(&mut rng, "Z");
    let cities = ["Austin", "Leeds", "Lyon", "Osaka", "Perth"];
    let parts = vec![
        table(
            SCHEMA,
            "wh",
            vec![
                (column("wh_code", "varchar(8)", false), codes("W", n_parent)),
                (
                    column("city", "nvarchar(40)", false),
                    (0..n_parent).map(|i| s(cities[i % cities.len()])).collect(),
                ),
            ],
        ),
        table(
            SCHEMA,
            "carrier",
            vec![
                (column("carrier_code", "varchar(8)", false), codes("CR", n_parent)),
                (column("carrier_nm", "nvarchar(40)", false), labels("Carrier", n_parent)),
            ],
        ),
        table(
            SCHEMA,
            "zone",
            vec![
                (column("zone_code", "varchar(8)", false), codes("Z", n_parent)),
                (column("zone_lbl", "nvarchar(40)", false), labels("Zone", n_parent)),
            ],
        ),
        table(
            SCHEMA,
            "shp",
            vec![
                (column("shp_id", "int", false), seq(1, n_shp)),
                (column("wh_code", "varchar(8)", false), wh),
                (column("carrier_code", "varchar(8)", false), carrier),
                (column("zone_code", "varchar(8)", false), zone),
                (column("wt_kg", "decimal(8,2)", false), (0..n_shp).map(|_| money(&mut rng, 1, 90)).collect()),
            ],
        ),
    ];
    let primary_keys = vec![
        pk("carrier", &["carrier_code"]),
        pk("shp", &["shp_id"]),
        pk("wh", &["wh_code"]),
        pk("zone", &["zone_code"]),
    ];
    let foreign_keys = vec![
        fk("shp", "carrier_code", "carrier", "carrier_code"),
        fk("shp", "wh_code", "wh", "wh_code"),
        fk("shp", "zone_code", "zone", "zone_code"),
    ];
    assemble(spec, parts, primary_keys, foreign_keys)
}
