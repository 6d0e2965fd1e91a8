//! Primary key candidate generation, filtering and scoring.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::names::{
    is_surrogate_name, matches_pk_pattern, plural_match, referenced_table_stems,
};
use super::values::{is_natural_code, is_sequential, is_uuid_shaped};
use super::{tier1_excluded_type, Penalty};
use crate::ingest::{Cell, DiscoveryInput};
use crate::model::{CanonicalType, ColumnMeta, TableMeta, TableRef};
use crate::stats::{ColumnProfile, SchemaProfiles, TableProfile};

pub const PK_THRESHOLD: f64 = 70.0;
pub const HIGH_UNIQUENESS: f64 = 0.95;
pub const SURROGATE_BOOST: f64 = 20.0;
pub const PREFIX_BOOST: f64 = 1.1;

/// Name fragments that disqualify a column from being a key.
pub const NAME_BLACKLIST: [&str; 13] = [
    "date", "time", "qty", "quantity", "amount", "amt", "price", "cost", "total", "desc", "note",
    "comment", "name",
];

/// Uniqueness factor: `u` above 0.95, linear from 0 at 0.5 up to 0.95.
pub fn uniqueness_factor(u: f64) -> f64 {
    if u >= HIGH_UNIQUENESS {
        u
    } else if u >= 0.5 {
        0.95 * (u - 0.5) / 0.45
    } else {
        0.0
    }
}

pub fn type_factor(ty: CanonicalType) -> f64 {
    match ty {
        CanonicalType::Int | CanonicalType::Bigint | CanonicalType::Smallint | CanonicalType::Uuid => 1.0,
        CanonicalType::Varchar => 0.6,
        CanonicalType::Text | CanonicalType::Binary => 0.2,
        _ => 0.3,
    }
}

/// Ordinal-position multiplier.
pub fn position_multiplier(pos: usize) -> f64 {
    match pos {
        0 => 1.0,
        1 => 0.85,
        2 => 0.70,
        _ => 0.55,
    }
}

pub const PATTERN_SEQUENTIAL: f64 = 1.0;
pub const PATTERN_UUID: f64 = 1.0;
pub const PATTERN_NATURAL_CODE: f64 = 10.0 / 15.0;
pub const PATTERN_COMPOSITE: f64 = 5.0 / 15.0;

/// Everything the score depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PkScoreInputs {
    pub f_u: f64,
    pub n: f64,
    pub d: f64,
    pub p: f64,
    pub has_nulls: bool,
    pub atypical_name: bool,
    pub fk_likelihood: f64,
    pub surrogate: bool,
    /// `None` disables the position multiplier.
    pub position: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PkScore {
    pub base: f64,
    pub penalties: Vec<Penalty>,
    pub surrogate_boost: f64,
    pub position_multiplier: f64,
    pub score: f64,
}

pub fn score_pk_formula(i: &PkScoreInputs) -> PkScore {
    let base = 50.0 * i.f_u + 20.0 * i.n + 15.0 * i.d + 15.0 * i.p;
    let mut penalties = Vec::new();
    if i.has_nulls {
        penalties.push(Penalty::new("nulls", 0.7));
    }
    if i.atypical_name {
        penalties.push(Penalty::new("atypical_name", 0.5));
    }
    if i.fk_likelihood > 0.0 {
        penalties.push(Penalty::new("fk_likelihood", 1.0 - 0.6 * i.fk_likelihood));
    }
    let penalized = penalties.iter().fold(base, |s, p| s * p.multiplier);
    let surrogate_boost = if i.surrogate { SURROGATE_BOOST } else { 0.0 };
    let phi = i.position.map_or(1.0, position_multiplier);
    let score = ((penalized + surrogate_boost) * phi).clamp(0.0, 100.0);
    PkScore {
        base,
        penalties,
        surrogate_boost,
        position_multiplier: phi,
        score,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PkFactors {
    pub uniqueness: f64,
    pub f_u: f64,
    pub n: f64,
    pub d: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PkCandidate {
    pub table: TableRef,
    pub columns: Vec<String>,
    pub positions: Vec<usize>,
    pub factors: PkFactors,
    pub fk_likelihood: f64,
    pub breakdown: PkScore,
    /// Table-level adjustments applied after scoring (prefix boost,
    /// progressive discount).
    pub adjustments: Vec<Penalty>,
    pub score: f64,
    pub accepted: bool,
    /// Individually eligible part of an accepted composite key.
    pub suppressed: bool,
}

impl PkCandidate {
    pub fn is_composite(&self) -> bool {
        self.columns.len() > 1
    }

    pub fn is_detected(&self) -> bool {
        self.accepted && !self.suppressed
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "reason", content = "detail")]
pub enum PkRejectReason {
    Nulls,
    BlankOrZero,
    Blacklist(String),
    UnsupportedType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PkRejection {
    pub table: TableRef,
    pub columns: Vec<String>,
    pub reason: PkRejectReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct PkConfig {
    pub threshold: f64,
    pub position_heuristics: bool,
}

impl Default for PkConfig {
    fn default() -> Self {
        Self {
            threshold: PK_THRESHOLD,
            position_heuristics: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PkDiscovery {
    pub candidates: Vec<PkCandidate>,
    pub rejections: Vec<PkRejection>,
}

impl PkDiscovery {
    pub fn detected(&self) -> impl Iterator<Item = &PkCandidate> {
        self.candidates.iter().filter(|c| c.is_detected())
    }

    /// Highest-scoring detected key of a table.
    pub fn primary_key(&self, table: &TableRef) -> Option<&PkCandidate> {
        self.detected()
            .filter(|c| &c.table == table)
            .max_by(|a, b| {
                a.score
                    .total_cmp(&b.score)
                    .then_with(|| b.positions.cmp(&a.positions))
            })
    }

    /// The table's detected key when it is a single column.
    pub fn single_column_pk(&self, table: &TableRef) -> Option<&str> {
        self.primary_key(table)
            .filter(|c| !c.is_composite())
            .map(|c| c.columns[0].as_str())
    }

    pub fn is_detected_single(&self, table: &TableRef, column: &str) -> bool {
        self.detected()
            .any(|c| &c.table == table && c.columns.len() == 1 && c.columns[0] == column)
    }
}

/// Hard filter shared by key scoring and foreign-key target checks.
pub fn hard_reject(column: &ColumnMeta, profile: &ColumnProfile) -> Option<PkRejectReason> {
    if column.canonical_type == CanonicalType::Other {
        return Some(PkRejectReason::UnsupportedType);
    }
    if profile.null_fraction > 0.0 {
        return Some(PkRejectReason::Nulls);
    }
    name_or_blank_reject(column, profile)
}

fn name_or_blank_reject(column: &ColumnMeta, profile: &ColumnProfile) -> Option<PkRejectReason> {
    if profile.blank_or_zero_fraction > 0.5 {
        return Some(PkRejectReason::BlankOrZero);
    }
    let lower = column.name.to_lowercase();
    NAME_BLACKLIST
        .iter()
        .find(|w| lower.contains(*w))
        .map(|w| PkRejectReason::Blacklist((*w).to_string()))
}

/// Exact distinct ratio over the full column plus whether any null occurs.
pub fn exact_uniqueness(column: &[Cell], row_count: u64) -> (f64, bool) {
    let mut seen = HashSet::new();
    let mut nulls = false;
    for c in column {
        match c {
            Some(v) => {
                seen.insert(v.as_str());
            }
            None => nulls = true,
        }
    }
    let rows = row_count.max(column.len() as u64);
    if rows == 0 {
        (0.0, nulls)
    } else {
        (seen.len() as f64 / rows as f64, nulls)
    }
}

/// Whether a column could serve as a key: survives the hard filters and is
/// fully unique. Foreign-key target checks use the same rule.
pub fn is_pk_eligible(
    input: &DiscoveryInput<'_>,
    profiles: &SchemaProfiles,
    table: &TableRef,
    column: &str,
) -> bool {
    let (Some(meta), Some(tp)) = (input.table(table), profiles.get(table)) else {
        return false;
    };
    let (Some(col), Some(profile)) = (meta.column(column), tp.column(column)) else {
        return false;
    };
    if hard_reject(col, profile).is_some() || profile.observed_rows == 0 {
        return false;
    }
    verified_uniqueness(input, tp, table, column, profile) == (1.0, false)
}

fn verified_uniqueness(
    input: &DiscoveryInput<'_>,
    tp: &TableProfile,
    table: &TableRef,
    column: &str,
    profile: &ColumnProfile,
) -> (f64, bool) {
    if !profile.is_estimate || profile.observed_rows == 0 {
        return (profile.uniqueness, profile.null_fraction > 0.0);
    }
    match input.column_values(table, column) {
        Some(values) => exact_uniqueness(values, tp.row_count),
        None => (profile.uniqueness, profile.null_fraction > 0.0),
    }
}

fn sampled_values<'a>(values: &'a [Cell], rows: &[usize]) -> Vec<&'a str> {
    rows.iter()
        .filter_map(|&r| values.get(r).and_then(|c| c.as_deref()))
        .collect()
}

/// Data-pattern factor from the sampled values.
pub fn pattern_factor(ty: CanonicalType, values: &[&str]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    if ty.is_integer() && is_sequential(values) {
        PATTERN_SEQUENTIAL
    } else if values.iter().all(|v| is_uuid_shaped(v)) {
        PATTERN_UUID
    } else if ty.is_string() && values.iter().all(|v| is_natural_code(v)) {
        PATTERN_NATURAL_CODE
    } else {
        0.0
    }
}

/// Likelihood that a column is a reference to another table rather than
/// this table's key: 1 when its name resolves to a different table and its
/// type could carry a reference, else 0.
pub fn fk_likelihood(tables: &[TableMeta], table: &TableRef, column: &ColumnMeta) -> f64 {
    if tier1_excluded_type(column.canonical_type) {
        return 0.0;
    }
    let stems = referenced_table_stems(&column.name);
    let hit = tables.iter().any(|t| {
        &t.table_ref() != table && stems.iter().any(|s| plural_match(s, &t.table_name))
    });
    if hit {
        1.0
    } else {
        0.0
    }
}

fn pair_is_unique(a: &[Cell], b: &[Cell], rows: &[usize]) -> bool {
    let mut seen = HashSet::new();
    rows.iter().all(|&r| match (&a[r], &b[r]) {
        (Some(x), Some(y)) => seen.insert((x.as_str(), y.as_str())),
        _ => false,
    })
}

/// Generates, filters and scores the key candidates of one table.
pub fn discover_table_pks(
    input: &DiscoveryInput<'_>,
    profiles: &SchemaProfiles,
    meta: &TableMeta,
    config: &PkConfig,
) -> PkDiscovery {
    let table = meta.table_ref();
    let mut out = PkDiscovery::default();
    let Some(tp) = profiles.get(&table) else {
        return out;
    };
    let data = input.data.get(&table);
    let empty: &[Cell] = &[];
    let column_values = |i: usize| data.map_or(empty, |d| d.column(i));
    let position = |pos: usize| config.position_heuristics.then_some(pos);

    let mut any_unique = false;
    for (i, col) in meta.columns.iter().enumerate() {
        let Some(profile) = tp.column(&col.name) else {
            continue;
        };
        let pattern = matches_pk_pattern(&col.name);
        if !pattern && profile.uniqueness < HIGH_UNIQUENESS {
            continue;
        }
        if let Some(reason) = hard_reject(col, profile) {
            out.rejections.push(PkRejection {
                table: table.clone(),
                columns: vec![col.name.clone()],
                reason,
            });
            continue;
        }
        let (u, nulls) = verified_uniqueness(input, tp, &table, &col.name, profile);
        if nulls {
            out.rejections.push(PkRejection {
                table: table.clone(),
                columns: vec![col.name.clone()],
                reason: PkRejectReason::Nulls,
            });
            continue;
        }
        any_unique |= u >= 1.0;
        let surrogate_name = is_surrogate_name(&col.name, &meta.table_name);
        let d = type_factor(col.canonical_type);
        let factors = PkFactors {
            uniqueness: u,
            f_u: uniqueness_factor(u),
            n: if pattern || surrogate_name { 1.0 } else { 0.0 },
            d,
            p: pattern_factor(col.canonical_type, &sampled_values(column_values(i), &tp.sampled_rows)),
        };
        let likelihood = fk_likelihood(input.tables, &table, col);
        let breakdown = score_pk_formula(&PkScoreInputs {
            f_u: factors.f_u,
            n: factors.n,
            d,
            p: factors.p,
            has_nulls: false,
            atypical_name: u >= HIGH_UNIQUENESS && factors.n == 0.0,
            fk_likelihood: likelihood,
            surrogate: surrogate_name && u >= HIGH_UNIQUENESS && d >= 0.9,
            position: position(col.ordinal_position),
        });
        out.candidates.push(PkCandidate {
            table: table.clone(),
            columns: vec![col.name.clone()],
            positions: vec![col.ordinal_position],
            factors,
            fk_likelihood: likelihood,
            score: breakdown.score,
            breakdown,
            adjustments: Vec::new(),
            accepted: false,
            suppressed: false,
        });
    }

    if !any_unique && !tp.sampled_rows.is_empty() {
        let parts: Vec<(usize, &ColumnMeta)> = meta
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| {
                c.canonical_type != CanonicalType::Other
                    && tp
                        .column(&c.name)
                        .is_some_and(|p| name_or_blank_reject(c, p).is_none())
            })
            .collect();
        let all_rows: Vec<usize> = (0..data.map_or(0, |d| d.row_count())).collect();
        for (x, (i, a)) in parts.iter().enumerate() {
            for (j, b) in &parts[x + 1..] {
                let (va, vb) = (column_values(*i), column_values(*j));
                if !pair_is_unique(va, vb, &tp.sampled_rows)
                    || (!tp.is_full_scan() && !pair_is_unique(va, vb, &all_rows))
                {
                    continue;
                }
                let pa = tp.column(&a.name).expect("profiled");
                let pb = tp.column(&b.name).expect("profiled");
                let d = (type_factor(a.canonical_type) + type_factor(b.canonical_type)) / 2.0;
                let n = if matches_pk_pattern(&a.name) || matches_pk_pattern(&b.name) {
                    1.0
                } else {
                    0.0
                };
                let factors = PkFactors {
                    uniqueness: 1.0,
                    f_u: 1.0,
                    n,
                    d,
                    p: PATTERN_COMPOSITE,
                };
                let first = a.ordinal_position.min(b.ordinal_position);
                let breakdown = score_pk_formula(&PkScoreInputs {
                    f_u: 1.0,
                    n,
                    d,
                    p: PATTERN_COMPOSITE,
                    has_nulls: pa.null_fraction > 0.0 || pb.null_fraction > 0.0,
                    atypical_name: false,
                    fk_likelihood: 0.0,
                    surrogate: false,
                    position: position(first),
                });
                out.candidates.push(PkCandidate {
                    table: table.clone(),
                    columns: vec![a.name.clone(), b.name.clone()],
                    positions: vec![a.ordinal_position, b.ordinal_position],
                    factors,
                    fk_likelihood: 0.0,
                    score: breakdown.score,
                    breakdown,
                    adjustments: Vec::new(),
                    accepted: false,
                    suppressed: false,
                });
            }
        }
    }

    if config.position_heuristics {
        apply_position_heuristics(&mut out.candidates);
    }
    for c in &mut out.candidates {
        c.accepted = c.score >= config.threshold;
    }
    if config.position_heuristics {
        suppress_composite_parts(&mut out.candidates);
    }
    out
}

/// Prefix boost for composites and progressive discounts for additional
/// high-uniqueness single columns.
pub fn apply_position_heuristics(candidates: &mut [PkCandidate]) {
    for c in candidates.iter_mut().filter(|c| c.is_composite()) {
        let mut pos = c.positions.clone();
        pos.sort_unstable();
        if pos.iter().enumerate().all(|(i, p)| i == *p) {
            c.adjustments.push(Penalty::new("contiguous_prefix", PREFIX_BOOST));
            c.score = (c.score * PREFIX_BOOST).min(100.0);
        }
    }
    let mut eligible: Vec<usize> = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_composite() && c.factors.uniqueness >= HIGH_UNIQUENESS)
        .map(|(i, _)| i)
        .collect();
    eligible.sort_by_key(|&i| candidates[i].positions[0]);
    for (rank, &i) in eligible.iter().enumerate().skip(1) {
        let m = position_multiplier(rank);
        candidates[i].adjustments.push(Penalty::new("additional_unique_column", m));
        candidates[i].score = (candidates[i].score * m).clamp(0.0, 100.0);
    }
}

fn suppress_composite_parts(candidates: &mut [PkCandidate]) {
    let parts: HashSet<String> = candidates
        .iter()
        .filter(|c| c.is_composite() && c.accepted)
        .flat_map(|c| c.columns.iter().cloned())
        .collect();
    for c in candidates.iter_mut() {
        if !c.is_composite() && parts.contains(&c.columns[0]) {
            c.suppressed = true;
        }
    }
}

pub fn discover_pks(
    input: &DiscoveryInput<'_>,
    profiles: &SchemaProfiles,
    config: &PkConfig,
) -> PkDiscovery {
    let mut all = PkDiscovery::default();
    for meta in input.tables {
        let t = discover_table_pks(input, profiles, meta, config);
        all.candidates.extend(t.candidates);
        all.rejections.extend(t.rejections);
    }
    all
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs() -> PkScoreInputs {
        PkScoreInputs {
            f_u: 1.0,
            n: 1.0,
            d: 1.0,
            p: 1.0,
            has_nulls: false,
            atypical_name: false,
            fk_likelihood: 0.0,
            surrogate: false,
            position: Some(0),
        }
    }

    #[test]
    fn maximal_factors_score_100() {
        assert_eq!(score_pk_formula(&inputs()).score, 100.0);
    }

    #[test]
    fn atypical_unique_column_is_halved() {
        let s = score_pk_formula(&PkScoreInputs {
            n: 0.0,
            atypical_name: true,
            ..inputs()
        });
        assert_eq!(s.base, 80.0);
        assert_eq!(s.score, 40.0);
        assert!(s.score < PK_THRESHOLD);
    }

    #[test]
    fn position_table() {
        assert_eq!(
            [0, 1, 2, 3, 9].map(position_multiplier),
            [1.0, 0.85, 0.70, 0.55, 0.55]
        );
    }

    #[test]
    fn uniqueness_factor_is_continuous() {
        assert_eq!(uniqueness_factor(0.4), 0.0);
        assert_eq!(uniqueness_factor(0.5), 0.0);
        assert!((uniqueness_factor(0.95 - 1e-12) - 0.95).abs() < 1e-9);
        assert_eq!(uniqueness_factor(0.97), 0.97);
    }

    #[test]
    fn hard_filters() {
        let col = |name: &str| ColumnMeta {
            name: name.into(),
            ordinal_position: 0,
            canonical_type: CanonicalType::Int,
            physical_type: "int".into(),
            nullable: false,
            default_expr: None,
            existing_description: None,
        };
        let cells: Vec<Cell> = (1..=100).map(|i| Some(i.to_string())).collect();
        let refs: Vec<&Cell> = cells.iter().collect();
        let clean = crate::stats::profile_column(&col("ID"), &refs, 100, Default::default());
        assert_eq!(hard_reject(&col("ID"), &clean), None);
        assert_eq!(
            hard_reject(&col("OrderDate"), &clean),
            Some(PkRejectReason::Blacklist("date".into()))
        );
        let mut nullish = clean.clone();
        nullish.null_fraction = 0.01;
        assert_eq!(hard_reject(&col("ID"), &nullish), Some(PkRejectReason::Nulls));
    }
}
