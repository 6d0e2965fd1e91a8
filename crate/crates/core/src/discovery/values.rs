//! Value-shape predicates and inclusion measurement.

use std::collections::HashSet;
use std::sync::OnceLock;

use regex::Regex;

use crate::ingest::Cell;
use crate::model::CanonicalType;

/// Source values examined when measuring containment.
pub const CONTAINMENT_SAMPLE: usize = 500;

fn re(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("static pattern"))
}

pub fn is_uuid_shaped(v: &str) -> bool {
    uuid::Uuid::try_parse(v.trim()).is_ok()
}

pub fn is_email(v: &str) -> bool {
    static RE: OnceLock<Regex> = OnceLock::new();
    re(&RE, r"^[^@\s]+@[^@\s]+\.[A-Za-z]{2,}$").is_match(v.trim())
}

pub fn is_url(v: &str) -> bool {
    static RE: OnceLock<Regex> = OnceLock::new();
    re(&RE, r"(?i)^(https?|ftp)://\S+$|^www\.\S+\.\S+$").is_match(v.trim())
}

/// Digits only, at most ten of them.
pub fn is_short_numeric_code(v: &str) -> bool {
    let v = v.trim();
    !v.is_empty() && v.len() <= 10 && v.bytes().all(|b| b.is_ascii_digit())
}

/// Short alphanumeric business code such as `SKU-0042` or `WH07`.
pub fn is_natural_code(v: &str) -> bool {
    static RE: OnceLock<Regex> = OnceLock::new();
    re(&RE, r"^[A-Za-z0-9][A-Za-z0-9_\-]{0,15}$").is_match(v)
}

/// Distinct integer values forming a step-1 progression once sorted.
pub fn is_sequential(values: &[&str]) -> bool {
    let mut ints: Vec<i64> = Vec::with_capacity(values.len());
    for v in values {
        match v.trim().parse::<i64>() {
            Ok(i) => ints.push(i),
            Err(_) => return false,
        }
    }
    ints.sort_unstable();
    ints.dedup();
    !ints.is_empty() && ints.windows(2).all(|w| w[1].checked_sub(w[0]) == Some(1))
}

/// Canonical comparison form of a value: integers without sign/zero padding
/// noise, UUIDs lowercased, everything else trimmed.
pub fn normalize_value(ty: CanonicalType, v: &str) -> String {
    let t = v.trim();
    if ty.is_integer() || ty.is_string() {
        if let Ok(i) = t.parse::<i64>() {
            return i.to_string();
        }
    }
    if ty == CanonicalType::Uuid || (ty.is_string() && is_uuid_shaped(t)) {
        return t.to_ascii_lowercase();
    }
    t.to_string()
}

/// Source values drawn for containment: the first distinct non-null values
/// among the sampled rows, in row order, capped at [`CONTAINMENT_SAMPLE`].
pub fn containment_sample(
    ty: CanonicalType,
    column: &[Cell],
    rows: &[usize],
    limit: usize,
) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for &r in rows {
        if out.len() >= limit {
            break;
        }
        if let Some(v) = column.get(r).and_then(|c| c.as_deref()) {
            let n = normalize_value(ty, v);
            if seen.insert(n.clone()) {
                out.push(n);
            }
        }
    }
    out
}

/// Full normalized value set of a target column.
pub fn value_set(ty: CanonicalType, column: &[Cell]) -> HashSet<String> {
    column
        .iter()
        .filter_map(|c| c.as_deref())
        .map(|v| normalize_value(ty, v))
        .collect()
}

/// Fraction of `source` values present in `target`; `None` when the source
/// sample is empty.
pub fn containment(source: &[String], target: &HashSet<String>) -> Option<f64> {
    if source.is_empty() {
        return None;
    }
    let hits = source.iter().filter(|v| target.contains(*v)).count();
    Some(hits as f64 / source.len() as f64)
}
