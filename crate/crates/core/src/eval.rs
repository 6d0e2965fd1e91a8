//! Scores discovered keys and description coverage against declared keys.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ingest::TruthFile;
use crate::model::{ObjectId, TableMeta, TableRef};
use crate::refine::DescriptionStore;

/// Weights in percent of FK F1, PK F1, table coverage and column coverage.
pub const OVERALL_WEIGHTS: [f64; 4] = [35.0, 30.0, 20.0, 15.0];
/// Descriptions below this confidence do not count as coverage.
pub const COVERAGE_MIN_CONFIDENCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        Self {
            precision,
            recall,
            f1: f1(precision, recall),
        }
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn overall_score(f1_fk: f64, f1_pk: f64, table_coverage: f64, column_coverage: f64) -> f64 {
    let [a, b, c, d] = OVERALL_WEIGHTS;
    (a * f1_fk + b * f1_pk + c * table_coverage + d * column_coverage) / 100.0
}

pub fn grade(score: f64) -> &'static str {
    match score {
        s if s >= 0.95 => "A+",
        s if s >= 0.90 => "A",
        s if s >= 0.85 => "B+",
        s if s >= 0.80 => "B",
        _ => "C",
    }
}

/// A primary key as `schema.table` plus its column set, normalized.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct KeyItem {
    pub table: String,
    pub columns: BTreeSet<String>,
}

/// A single-column reference between two normalized endpoints.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkItem {
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matches<T> {
    pub true_positives: Vec<T>,
    pub false_positives: Vec<T>,
    pub false_negatives: Vec<T>,
}

impl<T: Ord + Clone> Matches<T> {
    pub fn of(detected: &BTreeSet<T>, truth: &BTreeSet<T>) -> Self {
        Self {
            true_positives: detected.intersection(truth).cloned().collect(),
            false_positives: detected.difference(truth).cloned().collect(),
            false_negatives: truth.difference(detected).cloned().collect(),
        }
    }

    pub fn scores(&self) -> Prf {
        Prf::from_counts(
            self.true_positives.len(),
            self.false_positives.len(),
            self.false_negatives.len(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalReport {
    pub pk: Prf,
    pub fk: Prf,
    pub table_coverage: f64,
    pub column_coverage: f64,
    pub overall: f64,
    pub grade: String,
    pub pk_matches: Matches<KeyItem>,
    pub fk_matches: Matches<LinkItem>,
    pub warnings: Vec<String>,
}

/// Lowercase, trimmed, inner whitespace collapsed.
pub fn normalize_name(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

fn table_key(s: &str) -> String {
    normalize_name(&TableRef::parse(s.trim()).to_string())
}

fn column_key(table: &str, column: &str) -> String {
    format!("{}.{}", table_key(table), normalize_name(column))
}

/// What a run detected, in the shape the comparison needs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Detected {
    pub primary_keys: Vec<(TableRef, Vec<String>)>,
    /// Single-column references (source column, target column).
    pub foreign_keys: Vec<(TableRef, String, TableRef, String)>,
}

pub fn compare(
    detected: &Detected,
    truth: &TruthFile,
    tables: &[TableMeta],
    store: Option<&DescriptionStore>,
) -> EvalReport {
    let known: BTreeSet<String> = tables.iter().map(|t| table_key(&t.table_ref().to_string())).collect();
    let mut warnings = Vec::new();
    let mut check = |t: &str| {
        let k = table_key(t);
        if !known.contains(&k) {
            warnings.push(format!("truth references unknown table `{t}`"));
        }
    };
    for pk in &truth.primary_keys {
        check(&pk.table);
    }
    for fk in &truth.foreign_keys {
        check(&fk.source_table);
        check(&fk.target_table);
    }
    warnings.sort();
    warnings.dedup();

    let key = |t: &str, cols: &[String]| KeyItem {
        table: table_key(t),
        columns: cols.iter().map(|c| normalize_name(c)).collect(),
    };
    let truth_pks: BTreeSet<KeyItem> = truth.primary_keys.iter().map(|p| key(&p.table, &p.columns)).collect();
    let found_pks: BTreeSet<KeyItem> = detected
        .primary_keys
        .iter()
        .map(|(t, c)| key(&t.to_string(), c))
        .collect();
    let truth_fks: BTreeSet<LinkItem> = truth
        .foreign_keys
        .iter()
        .map(|f| LinkItem {
            source: column_key(&f.source_table, &f.source_column),
            target: column_key(&f.target_table, &f.target_column),
        })
        .collect();
    let found_fks: BTreeSet<LinkItem> = detected
        .foreign_keys
        .iter()
        .map(|(st, sc, tt, tc)| LinkItem {
            source: column_key(&st.to_string(), sc),
            target: column_key(&tt.to_string(), tc),
        })
        .collect();

    let pk_matches = Matches::of(&found_pks, &truth_pks);
    let fk_matches = Matches::of(&found_fks, &truth_fks);
    let (table_coverage, column_coverage) = coverage(tables, store);
    let pk = pk_matches.scores();
    let fk = fk_matches.scores();
    let overall = overall_score(fk.f1, pk.f1, table_coverage, column_coverage);
    EvalReport {
        pk,
        fk,
        table_coverage,
        column_coverage,
        overall,
        grade: grade(overall).to_string(),
        pk_matches,
        fk_matches,
        warnings,
    }
}

/// Fractions of tables and columns with a non-empty description of
/// sufficient confidence. Ground-truth text counts.
pub fn coverage(tables: &[TableMeta], store: Option<&DescriptionStore>) -> (f64, f64) {
    let Some(store) = store else {
        return (0.0, 0.0);
    };
    let covered = |id: ObjectId| {
        store
            .get(&id)
            .is_some_and(|r| !r.text.trim().is_empty() && r.confidence >= COVERAGE_MIN_CONFIDENCE)
    };
    let (mut t_all, mut t_ok, mut c_all, mut c_ok) = (0usize, 0usize, 0usize, 0usize);
    for t in tables {
        let tr = t.table_ref();
        t_all += 1;
        t_ok += covered(ObjectId::Table(tr.clone())) as usize;
        for c in &t.columns {
            c_all += 1;
            c_ok += covered(ObjectId::Column(tr.column(c.name.clone()))) as usize;
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    (ratio(t_ok, t_all), ratio(c_ok, c_all))
}
