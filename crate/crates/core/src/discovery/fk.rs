//! Foreign key target search, pre-filtering, scoring and gating.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::names::{column_similarity, plural_match, referenced_table_stems, normalize};
use super::pk::{is_pk_eligible, PkDiscovery};
use super::values::{
    containment, containment_sample, is_email, is_short_numeric_code, is_url, is_uuid_shaped,
    value_set, CONTAINMENT_SAMPLE,
};
use super::{tier1_excluded_type, Penalty};
use crate::ingest::DiscoveryInput;
use crate::model::{CanonicalType, ColumnRef, Relationship, RelationshipOrigin, TableMeta};
use crate::stats::SchemaProfiles;

pub const FK_THRESHOLD: f64 = 60.0;
pub const MIN_CONTAINMENT: f64 = 0.75;
pub const NAME_SIMILARITY_MIN: f64 = 0.8;
pub const TOP_TARGETS: usize = 3;
pub const ADAPTIVE_TRIGGER: f64 = 0.4;
pub const ORPHAN_LIMIT: f64 = 0.2;
/// Candidates this close to the threshold get their orphan rate measured on
/// the full source column.
pub const ORPHAN_RECHECK_BAND: f64 = 5.0;
pub const TIER2_SAMPLE: usize = 10;
pub const MAX_KEY_LENGTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FkWeights {
    pub v: f64,
    pub s: f64,
    pub r: f64,
    pub k: f64,
    pub nu: f64,
}

impl FkWeights {
    pub const STANDARD: FkWeights = FkWeights {
        v: 40.0,
        s: 20.0,
        r: 15.0,
        k: 15.0,
        nu: 10.0,
    };
    pub const ADAPTIVE: FkWeights = FkWeights {
        v: 55.0,
        s: 20.0,
        r: 15.0,
        k: 0.0,
        nu: 10.0,
    };

    pub fn total(&self) -> f64 {
        self.v + self.s + self.r + self.k + self.nu
    }
}

/// Cardinality-ratio factor.
pub fn ratio_factor(rho: f64) -> f64 {
    rho.min(2.0) / 2.0
}

/// Null-fraction factor.
pub fn null_factor(null_fraction: f64) -> f64 {
    if null_fraction < 0.30 {
        1.0
    } else if null_fraction <= 0.70 {
        0.5
    } else {
        0.0
    }
}

/// Fan-out multiplier for a source column with `n` surviving targets.
pub fn fan_out_multiplier(n: usize) -> f64 {
    match n {
        0 | 1 => 1.0,
        2 => 0.85,
        3 => 0.75,
        _ => 0.65,
    }
}

/// Confidence multiplier for sources with far fewer rows than the target.
pub fn row_ratio_multiplier(source_rows: u64, target_rows: u64) -> f64 {
    let (s, t) = (source_rows as f64, target_rows as f64);
    if t > 0.0 && s < 0.01 * t {
        (s / t).clamp(0.5, 1.0)
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkScoreInputs {
    pub v: f64,
    pub s: f64,
    pub rho: f64,
    pub k: bool,
    pub null_fraction: f64,
    pub adaptive: bool,
    pub orphan_rate: f64,
    pub coercible_types: bool,
    pub row_ratio_multiplier: f64,
    pub fan_out: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FkScore {
    pub weights: FkWeights,
    pub r: f64,
    pub nu: f64,
    pub base: f64,
    pub penalties: Vec<Penalty>,
    pub fan_out_multiplier: f64,
    pub score: f64,
}

pub fn score_fk_formula(i: &FkScoreInputs) -> FkScore {
    let weights = if i.adaptive {
        FkWeights::ADAPTIVE
    } else {
        FkWeights::STANDARD
    };
    let r = ratio_factor(i.rho);
    let nu = null_factor(i.null_fraction);
    let k = if i.k { 1.0 } else { 0.0 };
    let base = weights.v * i.v + weights.s * i.s + weights.r * r + weights.k * k + weights.nu * nu;
    let mut penalties = Vec::new();
    if i.orphan_rate > ORPHAN_LIMIT {
        penalties.push(Penalty::new("orphans", 0.7));
    }
    if i.coercible_types {
        penalties.push(Penalty::new("type_coercion", 0.5));
    }
    if i.row_ratio_multiplier != 1.0 {
        penalties.push(Penalty::new("row_ratio", i.row_ratio_multiplier));
    }
    let psi = fan_out_multiplier(i.fan_out);
    let score = (penalties.iter().fold(base, |s, p| s * p.multiplier) * psi).clamp(0.0, 100.0);
    FkScore {
        weights,
        r,
        nu,
        base,
        penalties,
        fan_out_multiplier: psi,
        score,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetStrategy {
    NameDerived,
    NameSimilarity,
    Homonym,
    Proposed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gate {
    G1,
    G3,
    G4,
    G5,
    G6,
    G8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateOutcome {
    pub gate: Gate,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FkFactors {
    pub v: f64,
    pub s: f64,
    pub r: f64,
    pub rho: f64,
    pub k: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FkCandidate {
    pub source: ColumnRef,
    pub target: ColumnRef,
    pub strategy: TargetStrategy,
    pub factors: FkFactors,
    pub orphan_rate: f64,
    pub coercible_types: bool,
    pub fan_out: usize,
    pub breakdown: FkScore,
    pub gates: Vec<GateOutcome>,
    pub score: f64,
    pub origin: RelationshipOrigin,
    pub accepted: bool,
}

impl FkCandidate {
    pub fn failed_gate(&self) -> Option<Gate> {
        self.gates.iter().find(|g| !g.passed).map(|g| g.gate)
    }

    pub fn relationship(&self) -> Relationship {
        Relationship::single(&self.source, &self.target, self.score, self.origin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FkDrop {
    pub source: ColumnRef,
    pub target: ColumnRef,
    /// 1 and 2 for the pre-filter tiers, 0 for an empty containment sample.
    pub tier: u8,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct FkConfig {
    pub threshold: f64,
    pub adaptive_redistribution: bool,
}

impl Default for FkConfig {
    fn default() -> Self {
        Self {
            threshold: FK_THRESHOLD,
            adaptive_redistribution: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FkDiscovery {
    pub candidates: Vec<FkCandidate>,
    pub drops: Vec<FkDrop>,
    /// Share of tier-surviving candidates whose target is not a detected key.
    pub zero_k_fraction: f64,
    pub adaptive: bool,
    pub weights: FkWeights,
}

impl FkDiscovery {
    pub fn accepted(&self) -> impl Iterator<Item = &FkCandidate> {
        self.candidates.iter().filter(|c| c.accepted)
    }

    pub fn relationships(&self) -> Vec<Relationship> {
        self.accepted().map(FkCandidate::relationship).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Integer,
    Decimal,
    String,
    Uuid,
    Other,
}

fn family(ty: CanonicalType) -> Family {
    match ty {
        t if t.is_integer() => Family::Integer,
        CanonicalType::Decimal => Family::Decimal,
        CanonicalType::Varchar => Family::String,
        CanonicalType::Uuid => Family::Uuid,
        _ => Family::Other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TypeRelation {
    Compatible,
    Coercible,
    Incompatible,
}

pub fn type_relation(source: CanonicalType, target: CanonicalType) -> TypeRelation {
    use Family::*;
    match (family(source), family(target)) {
        (Other, _) | (_, Other) => TypeRelation::Incompatible,
        (a, b) if a == b => TypeRelation::Compatible,
        (Integer, Decimal) | (Decimal, Integer) => TypeRelation::Compatible,
        (String, Integer) | (Integer, String) | (String, Uuid) | (Uuid, String) => {
            TypeRelation::Coercible
        }
        _ => TypeRelation::Incompatible,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TierOutcome {
    Keep { promoted: bool, coercible: bool },
    Drop { tier: u8, reason: String },
}

/// Cheap pre-filter: type checks, then a look at up to ten sample values.
pub fn tier_filter(
    source_type: CanonicalType,
    target_type: CanonicalType,
    samples: &[String],
) -> TierOutcome {
    if tier1_excluded_type(source_type) {
        return TierOutcome::Drop {
            tier: 1,
            reason: format!("source type {source_type} cannot carry a reference"),
        };
    }
    let relation = type_relation(source_type, target_type);
    if relation == TypeRelation::Incompatible {
        return TierOutcome::Drop {
            tier: 1,
            reason: format!("incompatible types {source_type} -> {target_type}"),
        };
    }
    let samples: Vec<&str> = samples.iter().take(TIER2_SAMPLE).map(String::as_str).collect();
    if samples.iter().any(|v| v.chars().count() > MAX_KEY_LENGTH) {
        return TierOutcome::Drop {
            tier: 2,
            reason: "long string values".into(),
        };
    }
    let shaped = samples.iter().filter(|v| is_email(v) || is_url(v)).count();
    if !samples.is_empty() && shaped * 2 > samples.len() {
        return TierOutcome::Drop {
            tier: 2,
            reason: "email or URL values".into(),
        };
    }
    let promoted = !samples.is_empty()
        && (samples.iter().all(|v| is_uuid_shaped(v))
            || samples.iter().all(|v| is_short_numeric_code(v)));
    let coercible = relation == TypeRelation::Coercible;
    if coercible && !promoted {
        return TierOutcome::Drop {
            tier: 2,
            reason: format!("coercible types {source_type} -> {target_type} without key-shaped values"),
        };
    }
    TierOutcome::Keep {
        promoted,
        coercible,
    }
}

/// Candidate targets for a source column, in strategy order, deduplicated.
pub fn find_targets(
    input: &DiscoveryInput<'_>,
    profiles: &SchemaProfiles,
    pks: &PkDiscovery,
    source: &ColumnRef,
) -> Vec<(ColumnRef, TargetStrategy)> {
    let mut out: Vec<(ColumnRef, TargetStrategy)> = Vec::new();
    let mut push = |target: ColumnRef, strategy| {
        if &target != source && !out.iter().any(|(t, _)| *t == target) {
            out.push((target, strategy));
        }
    };

    let stems = referenced_table_stems(&source.column);
    for stem in &stems {
        for t in input.tables.iter().filter(|t| plural_match(stem, &t.table_name)) {
            if let Some(col) = name_derived_target(pks, t, &source.column) {
                push(t.table_ref().column(col), TargetStrategy::NameDerived);
            }
        }
    }

    let eligible: Vec<ColumnRef> = input
        .tables
        .iter()
        .flat_map(|t| {
            t.columns
                .iter()
                .map(move |c| t.table_ref().column(c.name.clone()))
        })
        .filter(|c| is_pk_eligible(input, profiles, &c.table, &c.column))
        .collect();
    for c in &eligible {
        if column_similarity(&source.column, &c.table.table, &c.column) >= NAME_SIMILARITY_MIN {
            push(c.clone(), TargetStrategy::NameSimilarity);
        }
    }
    for c in &eligible {
        if c.table != source.table && normalize(&c.column) == normalize(&source.column) {
            push(c.clone(), TargetStrategy::Homonym);
        }
    }
    out
}

fn name_derived_target<'a>(pks: &'a PkDiscovery, table: &'a TableMeta, source: &str) -> Option<&'a str> {
    if let Some(pk) = pks.single_column_pk(&table.table_ref()) {
        return Some(pk);
    }
    if let Some(c) = table.columns.iter().find(|c| normalize(&c.name) == normalize(source)) {
        return Some(&c.name);
    }
    table
        .columns
        .iter()
        .find(|c| normalize(&c.name) == "id")
        .or_else(|| table.columns.first())
        .map(|c| c.name.as_str())
}

/// Containment of sampled source values in the full target column.
pub fn compute_containment(
    input: &DiscoveryInput<'_>,
    profiles: &SchemaProfiles,
    source: &ColumnRef,
    target: &ColumnRef,
) -> Option<f64> {
    let rows = &profiles.get(&source.table)?.sampled_rows;
    containment_over(input, source, target, rows, CONTAINMENT_SAMPLE)
}

fn containment_over(
    input: &DiscoveryInput<'_>,
    source: &ColumnRef,
    target: &ColumnRef,
    rows: &[usize],
    limit: usize,
) -> Option<f64> {
    let sty = input.table(&source.table)?.column(&source.column)?.canonical_type;
    let tty = input.table(&target.table)?.column(&target.column)?.canonical_type;
    let svals = input.column_values(&source.table, &source.column)?;
    let tvals = input.column_values(&target.table, &target.column)?;
    containment(&containment_sample(sty, svals, rows, limit), &value_set(tty, tvals))
}

/// Orphan rate over every row of the source column.
fn full_orphan_rate(input: &DiscoveryInput<'_>, source: &ColumnRef, target: &ColumnRef) -> Option<f64> {
    let n = input.data.get(&source.table)?.row_count();
    let rows: Vec<usize> = (0..n).collect();
    containment_over(input, source, target, &rows, usize::MAX).map(|v| 1.0 - v)
}

struct Context<'a, 'b> {
    input: &'a DiscoveryInput<'b>,
    profiles: &'a SchemaProfiles,
    pks: &'a PkDiscovery,
    config: &'a FkConfig,
    adaptive: bool,
}

impl Context<'_, '_> {
    /// Gate verdicts that do not depend on other candidates.
    fn static_gates(&self, source: &ColumnRef, target: &ColumnRef, v: f64) -> Vec<GateOutcome> {
        let g1 = is_pk_eligible(self.input, self.profiles, &target.table, &target.column);
        let g3 = !target.column.eq_ignore_ascii_case("rowguid");
        let g6 = v >= MIN_CONTAINMENT;
        let g8 = source.table == target.table
            || !self.pks.is_detected_single(&source.table, &source.column);
        vec![
            GateOutcome { gate: Gate::G1, passed: g1 },
            GateOutcome { gate: Gate::G3, passed: g3 },
            GateOutcome { gate: Gate::G4, passed: true },
            GateOutcome { gate: Gate::G6, passed: g6 },
            GateOutcome { gate: Gate::G8, passed: g8 },
        ]
    }

    #[allow(clippy::too_many_arguments)]
    fn score(
        &self,
        source: &ColumnRef,
        target: &ColumnRef,
        strategy: TargetStrategy,
        v: f64,
        coercible: bool,
        fan_out: usize,
        gates: Vec<GateOutcome>,
        origin: RelationshipOrigin,
    ) -> FkCandidate {
        let sp = self
            .profiles
            .get(&source.table)
            .and_then(|t| t.column(&source.column));
        let source_rows = self.profiles.get(&source.table).map_or(0, |t| t.row_count);
        let target_rows = self.profiles.get(&target.table).map_or(0, |t| t.row_count);
        let distinct = sp.map_or(0, |p| p.distinct_count);
        let rho = if distinct == 0 {
            0.0
        } else {
            source_rows as f64 / distinct as f64
        };
        let null_fraction = sp.map_or(0.0, |p| p.null_fraction);
        let s = column_similarity(&source.column, &target.table.table, &target.column);
        let k = self
            .pks
            .single_column_pk(&target.table)
            .is_some_and(|pk| pk == target.column);
        let mut inputs = FkScoreInputs {
            v,
            s,
            rho,
            k,
            null_fraction,
            adaptive: self.adaptive,
            orphan_rate: 0.0,
            coercible_types: coercible,
            row_ratio_multiplier: row_ratio_multiplier(source_rows, target_rows),
            fan_out,
        };
        let provisional = score_fk_formula(&inputs).score;
        inputs.orphan_rate = if (provisional - self.config.threshold).abs() <= ORPHAN_RECHECK_BAND {
            full_orphan_rate(self.input, source, target).unwrap_or(1.0 - v)
        } else {
            1.0 - v
        };
        let breakdown = score_fk_formula(&inputs);
        FkCandidate {
            source: source.clone(),
            target: target.clone(),
            strategy,
            factors: FkFactors {
                v,
                s,
                r: breakdown.r,
                rho,
                k: if k { 1.0 } else { 0.0 },
                nu: breakdown.nu,
            },
            orphan_rate: inputs.orphan_rate,
            coercible_types: coercible,
            fan_out,
            score: breakdown.score,
            breakdown,
            gates,
            origin,
            accepted: false,
        }
    }
}

struct Survivor {
    source: ColumnRef,
    target: ColumnRef,
    strategy: TargetStrategy,
    coercible: bool,
}

/// Full statistical foreign key discovery over a schema.
pub fn discover_fks(
    input: &DiscoveryInput<'_>,
    profiles: &SchemaProfiles,
    pks: &PkDiscovery,
    config: &FkConfig,
) -> FkDiscovery {
    let mut drops = Vec::new();
    let mut survivors = Vec::new();
    for meta in input.tables {
        let table = meta.table_ref();
        let Some(tp) = profiles.get(&table) else {
            continue;
        };
        for col in &meta.columns {
            let source = table.column(col.name.clone());
            let samples = tp.column(&col.name).map_or(&[][..], |p| &p.sample_values[..]);
            for (target, strategy) in find_targets(input, profiles, pks, &source) {
                let Some(tty) = input
                    .table(&target.table)
                    .and_then(|t| t.column(&target.column))
                    .map(|c| c.canonical_type)
                else {
                    continue;
                };
                match tier_filter(col.canonical_type, tty, samples) {
                    TierOutcome::Drop { tier, reason } => drops.push(FkDrop {
                        source: source.clone(),
                        target,
                        tier,
                        reason,
                    }),
                    TierOutcome::Keep { coercible, .. } => survivors.push(Survivor {
                        source: source.clone(),
                        target,
                        strategy,
                        coercible,
                    }),
                }
            }
        }
    }

    let zero_k = survivors
        .iter()
        .filter(|s| pks.single_column_pk(&s.target.table) != Some(s.target.column.as_str()))
        .count();
    let zero_k_fraction = if survivors.is_empty() {
        0.0
    } else {
        zero_k as f64 / survivors.len() as f64
    };
    let adaptive = config.adaptive_redistribution && zero_k_fraction > ADAPTIVE_TRIGGER;
    let ctx = Context {
        input,
        profiles,
        pks,
        config,
        adaptive,
    };

    let mut measured = Vec::new();
    for s in survivors {
        match compute_containment(input, profiles, &s.source, &s.target) {
            None => drops.push(FkDrop {
                source: s.source,
                target: s.target,
                tier: 0,
                reason: "no source values to measure containment".into(),
            }),
            Some(v) => {
                let gates = ctx.static_gates(&s.source, &s.target, v);
                measured.push((s, v, gates));
            }
        }
    }

    let mut fan_out: BTreeMap<ColumnRef, usize> = BTreeMap::new();
    for (s, _, gates) in &measured {
        if gates.iter().all(|g| g.passed) {
            *fan_out.entry(s.source.clone()).or_default() += 1;
        }
    }

    let mut candidates: Vec<FkCandidate> = measured
        .into_iter()
        .map(|(s, v, gates)| {
            let n = fan_out.get(&s.source).copied().unwrap_or(0);
            ctx.score(
                &s.source,
                &s.target,
                s.strategy,
                v,
                s.coercible,
                n,
                gates,
                RelationshipOrigin::Statistical,
            )
        })
        .collect();

    apply_top_targets(&mut candidates);
    for c in &mut candidates {
        c.accepted = c.gates.iter().all(|g| g.passed) && c.score >= config.threshold;
    }
    FkDiscovery {
        candidates,
        drops,
        zero_k_fraction,
        adaptive,
        weights: if adaptive {
            FkWeights::ADAPTIVE
        } else {
            FkWeights::STANDARD
        },
    }
}

/// Keeps the three best-scoring gate-passing targets of each source column.
fn apply_top_targets(candidates: &mut [FkCandidate]) {
    let mut by_source: BTreeMap<ColumnRef, Vec<usize>> = BTreeMap::new();
    for (i, c) in candidates.iter().enumerate() {
        if c.gates.iter().all(|g| g.passed) {
            by_source.entry(c.source.clone()).or_default().push(i);
        }
    }
    let mut kept = HashSet::new();
    for idx in by_source.values_mut() {
        idx.sort_by(|&a, &b| {
            candidates[b]
                .score
                .total_cmp(&candidates[a].score)
                .then_with(|| candidates[a].target.cmp(&candidates[b].target))
        });
        kept.extend(idx.iter().take(TOP_TARGETS).copied());
    }
    for (i, c) in candidates.iter_mut().enumerate() {
        let passed_before = c.gates.iter().all(|g| g.passed);
        c.gates.push(GateOutcome {
            gate: Gate::G5,
            passed: !passed_before || kept.contains(&i),
        });
    }
}

/// A relationship suggested by the analyzer, not yet checked against data.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProposedFk {
    pub source_table: String,
    pub source_column: String,
    pub target_table: String,
    pub target_column: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalRejection {
    pub proposal: ProposedFk,
    pub reason: String,
    pub candidate: Option<FkCandidate>,
}

fn resolve(input: &DiscoveryInput<'_>, table: &str, column: &str) -> Option<ColumnRef> {
    let t = input.tables.iter().find(|t| {
        t.table_ref().to_string().eq_ignore_ascii_case(table) || t.table_name.eq_ignore_ascii_case(table)
    })?;
    let c = t.columns.iter().find(|c| c.name.eq_ignore_ascii_case(column))?;
    Some(t.table_ref().column(c.name.clone()))
}

/// Checks an analyzer-proposed relationship with the same evidence and
/// gates as statistical candidates.
pub fn validate_proposed_fk(
    input: &DiscoveryInput<'_>,
    profiles: &SchemaProfiles,
    pks: &PkDiscovery,
    config: &FkConfig,
    adaptive: bool,
    proposal: &ProposedFk,
) -> Result<FkCandidate, ProposalRejection> {
    let reject = |reason: String, candidate| ProposalRejection {
        proposal: proposal.clone(),
        reason,
        candidate,
    };
    let source = resolve(input, &proposal.source_table, &proposal.source_column).ok_or_else(|| {
        reject(
            format!("unknown source column {}.{}", proposal.source_table, proposal.source_column),
            None,
        )
    })?;
    let target = resolve(input, &proposal.target_table, &proposal.target_column).ok_or_else(|| {
        reject(
            format!("unknown target column {}.{}", proposal.target_table, proposal.target_column),
            None,
        )
    })?;
    if source == target {
        return Err(reject("source and target are the same column".into(), None));
    }
    let v = compute_containment(input, profiles, &source, &target)
        .ok_or_else(|| reject("no source values to measure containment".into(), None))?;
    let ctx = Context {
        input,
        profiles,
        pks,
        config,
        adaptive,
    };
    let gates: Vec<GateOutcome> = ctx
        .static_gates(&source, &target, v)
        .into_iter()
        .filter(|g| g.gate != Gate::G4)
        .collect();
    let coercible = match (input.table(&source.table), input.table(&target.table)) {
        (Some(s), Some(t)) => {
            let st = s.column(&source.column).map(|c| c.canonical_type);
            let tt = t.column(&target.column).map(|c| c.canonical_type);
            matches!((st, tt), (Some(a), Some(b)) if type_relation(a, b) == TypeRelation::Coercible)
        }
        _ => false,
    };
    let mut cand = ctx.score(
        &source,
        &target,
        TargetStrategy::Proposed,
        v,
        coercible,
        1,
        gates,
        RelationshipOrigin::AnalyzerProposed,
    );
    cand.accepted = cand.gates.iter().all(|g| g.passed) && cand.score >= config.threshold;
    if cand.accepted {
        Ok(cand)
    } else {
        let reason = match cand.failed_gate() {
            Some(g) => format!("rejected by gate {g:?}"),
            None => format!("score {:.2} below threshold {}", cand.score, config.threshold),
        };
        Err(reject(reason, Some(cand)))
    }
}

/// All sources with at least one accepted relationship.
pub fn accepted_sources(fks: &FkDiscovery) -> BTreeSet<ColumnRef> {
    fks.accepted().map(|c| c.source.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs() -> FkScoreInputs {
        FkScoreInputs {
            v: 1.0,
            s: 1.0,
            rho: 2.0,
            k: true,
            null_fraction: 0.0,
            adaptive: false,
            orphan_rate: 0.0,
            coercible_types: false,
            row_ratio_multiplier: 1.0,
            fan_out: 1,
        }
    }

    #[test]
    fn all_factors_maximal() {
        assert_eq!(score_fk_formula(&inputs()).score, 100.0);
    }

    #[test]
    fn fan_out_table() {
        assert_eq!([1, 2, 3, 4, 7].map(fan_out_multiplier), [1.0, 0.85, 0.75, 0.65, 0.65]);
    }

    #[test]
    fn ratio_factor_examples() {
        assert_eq!(ratio_factor(0.5), 0.25);
        assert_eq!(ratio_factor(10.0), 1.0);
    }

    #[test]
    fn weights_sum_to_100() {
        assert_eq!(FkWeights::STANDARD.total(), 100.0);
        assert_eq!(FkWeights::ADAPTIVE.total(), 100.0);
    }

    #[test]
    fn null_factor_bands() {
        assert_eq!(null_factor(0.29), 1.0);
        assert_eq!(null_factor(0.30), 0.5);
        assert_eq!(null_factor(0.70), 0.5);
        assert_eq!(null_factor(0.71), 0.0);
    }

    #[test]
    fn row_ratio_gate_shape() {
        assert_eq!(row_ratio_multiplier(100, 1000), 1.0);
        assert_eq!(row_ratio_multiplier(5, 1000), 0.5);
    }

    #[test]
    fn tiers() {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        assert!(matches!(
            tier_filter(CanonicalType::Boolean, CanonicalType::Int, &[]),
            TierOutcome::Drop { tier: 1, .. }
        ));
        assert!(matches!(
            tier_filter(CanonicalType::Varchar, CanonicalType::Varchar, &s(&["a@b.com", "c@d.org"])),
            TierOutcome::Drop { tier: 2, .. }
        ));
        assert_eq!(
            tier_filter(
                CanonicalType::Varchar,
                CanonicalType::Uuid,
                &s(&["6f1c0e2a-0000-4000-8000-000000000001"])
            ),
            TierOutcome::Keep { promoted: true, coercible: true }
        );
        assert!(matches!(
            tier_filter(CanonicalType::Varchar, CanonicalType::Int, &s(&["abc"])),
            TierOutcome::Drop { tier: 2, .. }
        ));
        assert_eq!(
            tier_filter(CanonicalType::Int, CanonicalType::Bigint, &s(&["1", "2"])),
            TierOutcome::Keep { promoted: true, coercible: false }
        );
    }
}
