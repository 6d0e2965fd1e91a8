//! Per-column statistical profiles.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::ingest::{sample_rows, Cell, DiscoveryInput};
use crate::model::{CanonicalType, ColumnMeta, TableMeta, TableRef};

pub const TOP_K: usize = 10;
pub const SAMPLE_VALUES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueCount {
    pub value: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TypeProfile {
    Numeric { p25: f64, p50: f64, p75: f64 },
    StringLength { min: usize, avg: f64, max: usize },
    DateRange { earliest: String, latest: String },
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnProfile {
    pub column: String,
    pub canonical_type: CanonicalType,
    /// Rows the profile was computed over.
    pub observed_rows: usize,
    pub distinct_count: usize,
    /// Distinct non-null values over rows, in `[0, 1]`.
    pub uniqueness: f64,
    /// True when `uniqueness` comes from a sample rather than the full table.
    pub is_estimate: bool,
    pub null_fraction: f64,
    pub min_value: Option<String>,
    pub max_value: Option<String>,
    /// Most frequent values, count descending then value ascending. Omitted
    /// when the column has more distinct values than the cardinality limit.
    pub top_k: Vec<ValueCount>,
    pub sample_values: Vec<String>,
    pub type_profile: TypeProfile,
    pub blank_or_zero_fraction: f64,
}

impl ColumnProfile {
    pub fn is_empty(&self) -> bool {
        self.observed_rows == 0
    }
}

/// Profiles of one table plus the row indices they were computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableProfile {
    pub table: TableRef,
    pub row_count: u64,
    pub sampled_rows: Vec<usize>,
    pub columns: Vec<ColumnProfile>,
}

impl TableProfile {
    pub fn column(&self, name: &str) -> Option<&ColumnProfile> {
        self.columns.iter().find(|c| c.column == name)
    }

    pub fn is_full_scan(&self) -> bool {
        self.sampled_rows.len() as u64 == self.row_count
    }
}

pub type SchemaProfiles = BTreeMap<TableRef, TableProfile>;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProfileOptions {
    /// Suppress top-k frequencies for columns with more distinct values.
    pub cardinality_threshold: Option<usize>,
}

fn numeric(v: &str) -> Option<f64> {
    v.trim().parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Ordering used for min/max: numeric for numeric columns, lexicographic
/// otherwise (ISO dates sort correctly as text).
pub fn typed_cmp(ty: CanonicalType, a: &str, b: &str) -> Ordering {
    if ty.is_numeric() {
        if let (Some(x), Some(y)) = (numeric(a), numeric(b)) {
            return x.total_cmp(&y).then_with(|| a.cmp(b));
        }
    }
    a.cmp(b)
}

/// Nearest-rank percentile over sorted data.
pub fn nearest_rank(sorted: &[f64], pct: f64) -> f64 {
    let n = sorted.len();
    let rank = ((pct / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

fn is_blank_or_zero(v: &str) -> bool {
    v.trim().is_empty() || numeric(v) == Some(0.0)
}

/// Profiles one column. `table_rows` is the catalog row count; when it equals
/// the number of observed values the profile is exact, otherwise uniqueness
/// is the sample distinct ratio and flagged as an estimate.
pub fn profile_column(
    column: &ColumnMeta,
    values: &[&Cell],
    table_rows: u64,
    options: ProfileOptions,
) -> ColumnProfile {
    let ty = column.canonical_type;
    let n = values.len();
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let mut first_seen: Vec<&str> = Vec::new();
    let mut nulls = 0usize;
    let mut blank_or_zero = 0usize;
    for v in values {
        match v.as_deref() {
            None => nulls += 1,
            Some(s) => {
                if is_blank_or_zero(s) {
                    blank_or_zero += 1;
                }
                let c = counts.entry(s).or_insert(0);
                if *c == 0 {
                    first_seen.push(s);
                }
                *c += 1;
            }
        }
    }
    let distinct = counts.len();
    let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    let is_estimate = n as u64 != table_rows;
    let uniqueness = if n == 0 {
        0.0
    } else if is_estimate {
        distinct as f64 / n as f64
    } else {
        distinct as f64 / table_rows as f64
    };

    let min_value = first_seen
        .iter()
        .min_by(|a, b| typed_cmp(ty, a, b))
        .map(|s| s.to_string());
    let max_value = first_seen
        .iter()
        .max_by(|a, b| typed_cmp(ty, a, b))
        .map(|s| s.to_string());

    let top_k = if options.cardinality_threshold.is_some_and(|t| distinct > t) {
        Vec::new()
    } else {
        let mut all: Vec<(&str, usize)> = counts.iter().map(|(k, v)| (*k, *v)).collect();
        all.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        all.into_iter()
            .take(TOP_K)
            .map(|(value, count)| ValueCount {
                value: value.to_string(),
                count,
            })
            .collect()
    };

    let sample_values = first_seen
        .iter()
        .take(SAMPLE_VALUES)
        .map(|s| s.to_string())
        .collect();

    let non_null: Vec<&str> = values.iter().filter_map(|v| v.as_deref()).collect();
    let type_profile = if non_null.is_empty() {
        TypeProfile::Empty
    } else if ty.is_numeric() {
        let mut xs: Vec<f64> = non_null.iter().filter_map(|s| numeric(s)).collect();
        if xs.is_empty() {
            TypeProfile::Empty
        } else {
            xs.sort_by(f64::total_cmp);
            TypeProfile::Numeric {
                p25: nearest_rank(&xs, 25.0),
                p50: nearest_rank(&xs, 50.0),
                p75: nearest_rank(&xs, 75.0),
            }
        }
    } else if ty.is_temporal() {
        TypeProfile::DateRange {
            earliest: min_value.clone().unwrap_or_default(),
            latest: max_value.clone().unwrap_or_default(),
        }
    } else {
        let lens: Vec<usize> = non_null.iter().map(|s| s.chars().count()).collect();
        TypeProfile::StringLength {
            min: lens.iter().copied().min().unwrap_or(0),
            avg: lens.iter().sum::<usize>() as f64 / lens.len() as f64,
            max: lens.iter().copied().max().unwrap_or(0),
        }
    };

    ColumnProfile {
        column: column.name.clone(),
        canonical_type: ty,
        observed_rows: n,
        distinct_count: distinct,
        uniqueness,
        is_estimate,
        null_fraction: frac(nulls),
        min_value,
        max_value,
        top_k,
        sample_values,
        type_profile,
        blank_or_zero_fraction: frac(blank_or_zero),
    }
}

/// Profiles every column of a table over its deterministic row sample.
pub fn profile_table(
    input: &DiscoveryInput<'_>,
    meta: &TableMeta,
    sample_size: usize,
    seed: u64,
    options: ProfileOptions,
) -> TableProfile {
    let table = meta.table_ref();
    let data = input.data.get(&table);
    let available = data.map_or(0, |d| d.row_count());
    let rows = sample_rows(available, &table, sample_size, seed);
    // the catalog count describes the full table; a short data file is a sample
    let row_count = meta.row_count.max(available as u64);
    let columns = meta
        .columns
        .iter()
        .enumerate()
        .map(|(i, col)| {
            let column = data.map_or(&[][..], |d| d.column(i));
            let values: Vec<&Cell> = rows.iter().map(|&r| &column[r]).collect();
            profile_column(col, &values, row_count, options)
        })
        .collect();
    TableProfile {
        table,
        row_count,
        sampled_rows: rows,
        columns,
    }
}

pub fn profile_schema(
    input: &DiscoveryInput<'_>,
    sample_size: usize,
    seed: u64,
    options: ProfileOptions,
) -> SchemaProfiles {
    input
        .tables
        .iter()
        .map(|t| (t.table_ref(), profile_table(input, t, sample_size, seed, options)))
        .collect()
}
