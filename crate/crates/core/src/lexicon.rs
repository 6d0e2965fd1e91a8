//! Abbreviation lexicon for turning cryptic identifiers into words.

use crate::discovery::names::tokens;

/// Abbreviations used by the fixture generator when producing clean names.
pub const ABBREVIATIONS: [(&str, &str); 20] = [
    ("rgn", "region"),
    ("cat", "category"),
    ("emp", "employee"),
    ("sup", "supplier"),
    ("cst", "customer"),
    ("prd", "product"),
    ("ord", "sales_order"),
    ("inv", "invoice"),
    ("ln", "line"),
    ("nm", "name"),
    ("cd", "code"),
    ("dt", "date"),
    ("mgr", "manager"),
    ("amt", "amount"),
    ("qty", "quantity"),
    ("crd", "credit"),
    ("lmt", "limit"),
    ("rt", "rate"),
    ("wh", "warehouse"),
    ("lbl", "label"),
];

/// Further abbreviations recognized when describing columns.
const EXTRA: [(&str, &str); 9] = [
    ("no", "number"),
    ("num", "number"),
    ("shp", "shipment"),
    ("wt", "weight"),
    ("kg", "kilograms"),
    ("desc", "description"),
    ("addr", "address"),
    ("pct", "percent"),
    ("id", "id"),
];

pub fn expand_token(tok: &str) -> &str {
    ABBREVIATIONS
        .iter()
        .chain(EXTRA.iter())
        .find(|(k, _)| *k == tok)
        .map_or(tok, |(_, v)| *v)
}

/// Expands each underscore-separated part with [`ABBREVIATIONS`] only.
pub fn expand_identifier(name: &str) -> String {
    name.split('_')
        .map(|tok| {
            ABBREVIATIONS
                .iter()
                .find(|(k, _)| *k == tok)
                .map_or(tok, |(_, v)| *v)
        })
        .collect::<Vec<_>>()
        .join("_")
}

/// Lowercase words of an identifier with every abbreviation expanded.
pub fn words(name: &str) -> Vec<String> {
    tokens(name)
        .iter()
        .flat_map(|t| {
            expand_token(t)
                .split('_')
                .map(str::to_string)
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Space-separated [`words`].
pub fn phrase(name: &str) -> String {
    words(name).join(" ")
}
