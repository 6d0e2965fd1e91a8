//! Column and table name handling shared by key discovery.

use regex::Regex;
use std::sync::OnceLock;

/// Suffixes that mark a column as an identifier reference, longest first.
const ID_SUFFIXES: [&str; 8] = ["_guid", "_code", "_key", "_id", "_cd", "guid", "key", "id"];

/// Splits a name into lowercase tokens at underscores, spaces, digit
/// boundaries and lower→upper case transitions (`SalesTerritoryID` →
/// `sales`, `territory`, `id`).
pub fn tokens(name: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let chars: Vec<char> = name.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if !c.is_alphanumeric() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            continue;
        }
        if let Some(&prev) = i.checked_sub(1).and_then(|j| chars.get(j)) {
            let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
            let boundary = (prev.is_lowercase() && c.is_uppercase())
                || (prev.is_uppercase() && c.is_uppercase() && next_lower)
                || (prev.is_ascii_digit() != c.is_ascii_digit() && prev.is_alphanumeric());
            if boundary && !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        }
        cur.extend(c.to_lowercase());
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Lowercased name with separators removed.
pub fn normalize(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

fn pk_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^.*[Ii][Dd]$").expect("static pattern"))
}

pub fn matches_pk_pattern(name: &str) -> bool {
    pk_pattern().is_match(name)
}

/// `id` or `{table}_id`, case-insensitive.
pub fn is_surrogate_name(column: &str, table: &str) -> bool {
    let c = column.to_lowercase();
    c == "id" || c == format!("{}_id", table.to_lowercase())
}

/// Strips one trailing identifier suffix. Returns `None` if the name carries
/// no such suffix or nothing would remain.
pub fn strip_id_suffix(name: &str) -> Option<String> {
    let lower = name.to_lowercase();
    ID_SUFFIXES.iter().find_map(|suf| {
        let stem = lower.strip_suffix(suf)?;
        let stem = stem.trim_end_matches('_');
        if stem.is_empty() {
            return None;
        }
        let original = (lower.len() == name.len()).then(|| name.get(..stem.len())).flatten();
        Some(original.unwrap_or(stem).to_string())
    })
}

/// Candidate table names for an identifier column: the whole stem first,
/// then progressively shorter trailing token runs (`mgr_emp_id` → `mgr_emp`,
/// `emp`).
pub fn referenced_table_stems(column: &str) -> Vec<String> {
    let Some(stem) = strip_id_suffix(column) else {
        return Vec::new();
    };
    let toks = tokens(&stem);
    let mut out = vec![normalize(&stem)];
    for start in 1..toks.len() {
        let tail: String = toks[start..].concat();
        if !out.contains(&tail) {
            out.push(tail);
        }
    }
    out
}

/// Table name equals the stem up to singular/plural spelling.
pub fn plural_match(stem: &str, table: &str) -> bool {
    let t = normalize(table);
    let s = normalize(stem);
    if s.is_empty() {
        return false;
    }
    let forms = |a: &str| {
        let mut v = vec![a.to_string(), format!("{a}s"), format!("{a}es")];
        if let Some(root) = a.strip_suffix('y') {
            v.push(format!("{root}ies"));
        }
        v
    };
    forms(&s).contains(&t) || forms(&t).contains(&s)
}

/// Name similarity in `[0, 1]`: 1.0 when equal, 0.8 when the shorter name
/// (at least four characters) is contained in the longer, otherwise one
/// minus the normalized Levenshtein distance. When both names end in an
/// identifier suffix the distance is taken between the stems, so `prd_id`
/// and `ord_id` compare as `prd` and `ord`.
pub fn similarity(a: &str, b: &str) -> f64 {
    let (na, nb) = (normalize(a), normalize(b));
    if na.is_empty() || nb.is_empty() {
        return 0.0;
    }
    if na == nb {
        return 1.0;
    }
    let (short, long) = if na.chars().count() <= nb.chars().count() {
        (&na, &nb)
    } else {
        (&nb, &na)
    };
    if short.chars().count() >= 4 && long.contains(short.as_str()) {
        return 0.8;
    }
    match (strip_id_suffix(a), strip_id_suffix(b)) {
        (Some(sa), Some(sb)) => levenshtein_similarity(&normalize(&sa), &normalize(&sb)),
        _ => levenshtein_similarity(&na, &nb),
    }
}

/// One minus edit distance over the longer length.
pub fn levenshtein_similarity(a: &str, b: &str) -> f64 {
    strsim::normalized_levenshtein(a, b).max(0.0)
}

/// Similarity of a source column to a target column, taking the best of the
/// bare target name and the table-qualified forms (`cst` + `id` reads as
/// `cstid`).
pub fn column_similarity(source: &str, target_table: &str, target_column: &str) -> f64 {
    let qualified = format!("{target_table}{target_column}");
    let mut best = similarity(source, target_column).max(similarity(source, &qualified));
    if normalize(target_column) == "id" {
        for form in table_forms(target_table) {
            best = best.max(similarity(source, &format!("{form}id")));
        }
    }
    best
}

fn table_forms(table: &str) -> Vec<String> {
    let t = normalize(table);
    let mut out = vec![t.clone()];
    if let Some(root) = t.strip_suffix("ies") {
        out.push(format!("{root}y"));
    } else if let Some(root) = t.strip_suffix("es") {
        out.push(root.to_string());
        out.push(format!("{root}e"));
    } else if let Some(root) = t.strip_suffix('s') {
        out.push(root.to_string());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizes_snake_and_camel() {
        assert_eq!(tokens("SalesTerritoryID"), ["sales", "territory", "id"]);
        assert_eq!(tokens("mgr_emp_id"), ["mgr", "emp", "id"]);
        assert_eq!(tokens("HTTPStatus2Code"), ["http", "status", "2", "code"]);
        assert_eq!(tokens("Order Details"), ["order", "details"]);
    }

    #[test]
    fn id_suffix_stripping() {
        assert_eq!(strip_id_suffix("CustomerID").as_deref(), Some("Customer"));
        assert_eq!(strip_id_suffix("cst_id").as_deref(), Some("cst"));
        assert_eq!(strip_id_suffix("wh_code").as_deref(), Some("wh"));
        assert_eq!(strip_id_suffix("id"), None);
        assert_eq!(strip_id_suffix("notes"), None);
        assert_eq!(referenced_table_stems("parent_cat_id"), ["parentcat", "cat"]);
    }

    #[test]
    fn plurals() {
        assert!(plural_match("Customer", "Customers"));
        assert!(plural_match("customer", "Customer"));
        assert!(plural_match("category", "categories"));
        assert!(plural_match("address", "addresses"));
        assert!(!plural_match("cust", "customer"));
    }

    #[test]
    fn similarity_rules() {
        assert_eq!(similarity("CustomerID", "customer_id"), 1.0);
        assert_eq!(similarity("TerritoryID", "SalesTerritoryID"), 0.8);
        assert_eq!(similarity("id", "cat_id"), 1.0 - 3.0 / 5.0);
        assert_eq!(similarity("prd_id", "ord_id"), 1.0 - 1.0 / 3.0);
        assert_eq!(similarity("sup_rowguid", "rowguid"), 0.8);
        assert_eq!(column_similarity("cst_id", "cst", "id"), 1.0);
        assert_eq!(column_similarity("CustomerID", "Customers", "ID"), 1.0);
    }

    #[test]
    fn pk_name_pattern() {
        assert!(matches_pk_pattern("CustomerID"));
        assert!(matches_pk_pattern("rowid"));
        assert!(!matches_pk_pattern("identity"));
        assert!(is_surrogate_name("ID", "cst"));
        assert!(is_surrogate_name("cst_id", "CST"));
        assert!(!is_surrogate_name("legacy_id", "cst"));
    }
}
