//! Iterative description refinement over dependency levels.
//!
//! Each iteration analyzes tables level by level, checks the level, hands
//! child insights to parents for revision, then compares every changed
//! description with its value at the start of the iteration to decide
//! convergence. State advances one step at a time (re-analysis queue, one
//! level, iteration close) so a caller can persist it between steps.

pub mod sanity;
mod store;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::analyzer::{
    self, AnalysisRequest, AnalysisResponse, Analyzer, ChangeClass, ColumnContext,
    ComparisonContext, Insight, NeighborDescription, RequestKind, RequestPayload,
    ResponsePayload, RevisionContext, SanityContext, SanityTable, TableAnalysis, TableContext,
    TokenUsage,
};
use crate::discovery::fk::{validate_proposed_fk, ProposedFk};
use crate::discovery::{FkConfig, PkDiscovery};
use crate::error::{AnalyzerError, SchemaError};
use crate::ingest::DiscoveryInput;
use crate::model::{DependencyGraph, ObjectId, TableMeta, TableRef};
use crate::stats::SchemaProfiles;

pub use sanity::{structural_violations, KeyFacts, Rule, SanityRules, Violation};
pub use store::{ChangeResult, DescriptionRecord, DescriptionStore, EntrySource, HistoryEntry};

/// Upper bound on iterations regardless of configuration.
pub const MAX_ITERATIONS_CAP: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ConvergenceConfig {
    /// Trailing iterations that must show no material change.
    pub window: usize,
    pub confidence_threshold: f64,
    pub max_iterations: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            window: 2,
            confidence_threshold: 0.6,
            max_iterations: 3,
        }
    }
}

impl ConvergenceConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.window < 1 {
            return Err("convergence window must be at least 1".into());
        }
        if !(self.confidence_threshold > 0.0 && self.confidence_threshold <= 1.0) {
            return Err("confidence threshold must be in (0, 1]".into());
        }
        if !(2..=MAX_ITERATIONS_CAP).contains(&self.max_iterations) {
            return Err(format!("max iterations must be between 2 and {MAX_ITERATIONS_CAP}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvergenceStatus {
    pub stable: bool,
    pub confident: bool,
    pub semantic: bool,
    pub converged: bool,
}

/// At least two criteria and at least two completed iterations.
pub fn convergence_rule(stable: bool, confident: bool, semantic: bool, iteration: usize) -> bool {
    let held = [stable, confident, semantic].iter().filter(|b| **b).count();
    held >= 2 && iteration >= 2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub iteration: usize,
    pub analysis_calls: usize,
    pub revisions_changed: usize,
    pub revisions_unchanged: usize,
    /// Descriptions whose text differs from the start of the iteration.
    pub changed: usize,
    pub material: usize,
    pub cosmetic: usize,
    /// Tables re-analyzed because of sanity violations.
    pub requeued: usize,
    pub violations: usize,
    pub min_table_confidence: f64,
    pub status: ConvergenceStatus,
}

/// Evaluates the criteria after the last summary in `history`.
pub fn check_convergence(history: &[IterationSummary], config: &ConvergenceConfig) -> ConvergenceStatus {
    let Some(last) = history.last() else {
        return ConvergenceStatus::default();
    };
    let stable = history.len() >= config.window
        && history[history.len() - config.window..]
            .iter()
            .all(|s| s.material + s.requeued == 0);
    let confident = last.min_table_confidence >= config.confidence_threshold;
    let semantic = last.material == 0;
    ConvergenceStatus {
        stable,
        confident,
        semantic,
        converged: convergence_rule(stable, confident, semantic, last.iteration),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct RefineConfig {
    pub convergence: ConvergenceConfig,
    pub sanity_rules: SanityRules,
    pub seed_context: String,
    /// Upper bound on concurrent analyzer calls within a level.
    pub parallelism: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            convergence: ConvergenceConfig::default(),
            sanity_rules: SanityRules::default(),
            seed_context: String::new(),
            parallelism: 4,
        }
    }
}

/// Data the engine consults for context, proposals and sanity checks.
#[derive(Clone, Copy)]
pub struct Evidence<'a> {
    pub input: DiscoveryInput<'a>,
    pub profiles: &'a SchemaProfiles,
    pub pks: &'a PkDiscovery,
    pub fk_config: &'a FkConfig,
    pub adaptive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalOutcome {
    pub iteration: usize,
    pub proposal: ProposedFk,
    pub accepted: bool,
    pub score: Option<f64>,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Allow,
    /// Allowed, but optional calls should be skipped.
    Degrade,
    Deny,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

/// Callbacks around analyzer calls and state checkpoints.
pub trait Hooks {
    /// Semantic comparisons are optional: on `Degrade` or `Deny` the engine
    /// skips the call and falls back to [`exact_match_class`].
    fn admit(&mut self, kind: RequestKind, estimated_tokens: u64) -> Admission;
    fn settle(&mut self, kind: RequestKind, estimated_tokens: u64, usage: TokenUsage);
    /// Called after every committed step.
    fn checkpoint(&mut self, state: &RefineState) -> Flow;
}

/// Hooks that admit everything and never stop.
#[derive(Debug, Default)]
pub struct Unlimited {
    pub usage: BTreeMap<RequestKind, TokenUsage>,
    pub calls: BTreeMap<RequestKind, usize>,
}

impl Hooks for Unlimited {
    fn admit(&mut self, _: RequestKind, _: u64) -> Admission {
        Admission::Allow
    }

    fn settle(&mut self, kind: RequestKind, _: u64, usage: TokenUsage) {
        self.usage.entry(kind).or_default().add(usage);
        *self.calls.entry(kind).or_default() += 1;
    }

    fn checkpoint(&mut self, _: &RefineState) -> Flow {
        Flow::Continue
    }
}

#[derive(Debug)]
pub enum Halt {
    Budget { kind: RequestKind },
    Analyzer(AnalyzerError),
    Stopped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineState {
    pub store: DescriptionStore,
    pub graph: DependencyGraph,
    /// Iteration in progress, from 1.
    pub iteration: usize,
    /// Next level to process; equal to the level count once the forward
    /// pass of the iteration is done.
    pub next_level: usize,
    pub requeue_done: bool,
    pub iteration_start: BTreeMap<ObjectId, String>,
    pub analyzed: BTreeSet<TableRef>,
    /// Tables to re-analyze at the start of this iteration, with reasons.
    pub requeue: BTreeMap<TableRef, Vec<String>>,
    pub requeue_next: BTreeMap<TableRef, Vec<String>>,
    /// Insights of re-analyzed tables, released at their own level.
    pub deferred_insights: BTreeMap<TableRef, Vec<Insight>>,
    pub counters: IterationSummary,
    pub insights: Vec<Insight>,
    pub violations: Vec<Violation>,
    pub proposals: Vec<ProposalOutcome>,
    pub iterations: Vec<IterationSummary>,
    pub finished: bool,
    pub converged: bool,
}

fn empty_summary(iteration: usize) -> IterationSummary {
    IterationSummary {
        iteration,
        analysis_calls: 0,
        revisions_changed: 0,
        revisions_unchanged: 0,
        changed: 0,
        material: 0,
        cosmetic: 0,
        requeued: 0,
        violations: 0,
        min_table_confidence: 1.0,
        status: ConvergenceStatus::default(),
    }
}

impl RefineState {
    /// Fresh state with ground truth installed. Fails on ground-truth ids
    /// that name no table or column.
    pub fn new(
        tables: &[TableMeta],
        graph: DependencyGraph,
        ground_truth: &BTreeMap<ObjectId, String>,
    ) -> Result<Self, SchemaError> {
        let mut store = DescriptionStore::new(tables);
        if let Some(id) = store.apply_ground_truth(ground_truth).into_iter().next() {
            return Err(match id {
                ObjectId::Table(t) => SchemaError::UnknownTable(t.to_string()),
                ObjectId::Column(c) => SchemaError::UnknownColumn(c.to_string()),
            });
        }
        Ok(Self {
            iteration_start: store.texts(),
            store,
            graph,
            iteration: 1,
            next_level: 0,
            requeue_done: false,
            analyzed: BTreeSet::new(),
            requeue: BTreeMap::new(),
            requeue_next: BTreeMap::new(),
            deferred_insights: BTreeMap::new(),
            counters: empty_summary(1),
            insights: Vec::new(),
            violations: Vec::new(),
            proposals: Vec::new(),
            iterations: Vec::new(),
            finished: false,
            converged: false,
        })
    }

    fn table_immutable(&self, t: &TableRef) -> bool {
        self.store.is_immutable(&ObjectId::Table(t.clone()))
    }
}

/// Runs refinement steps until the state is finished, a hook stops it, or a
/// call is refused or fails. On error the state is left at the last
/// checkpoint.
pub fn run_iterations(
    state: &mut RefineState,
    tables: &[TableMeta],
    ev: &Evidence<'_>,
    analyzer: &dyn Analyzer,
    config: &RefineConfig,
    hooks: &mut dyn Hooks,
) -> Result<(), Halt> {
    let engine = Engine {
        tables,
        ev,
        analyzer,
        config,
    };
    while !state.finished {
        let mut work = state.clone();
        engine.step(&mut work, hooks)?;
        *state = work;
        if hooks.checkpoint(state) == Flow::Stop {
            return Err(Halt::Stopped);
        }
    }
    Ok(())
}

struct Engine<'a> {
    tables: &'a [TableMeta],
    ev: &'a Evidence<'a>,
    analyzer: &'a dyn Analyzer,
    config: &'a RefineConfig,
}

impl Engine<'_> {
    fn step(&self, s: &mut RefineState, hooks: &mut dyn Hooks) -> Result<(), Halt> {
        if !s.requeue_done {
            self.reanalyze_queue(s, hooks)?;
            s.requeue_done = true;
        } else if s.next_level < s.graph.levels.len() {
            let level = s.next_level;
            self.process_level(s, level, hooks)?;
            s.next_level += 1;
        } else {
            self.close_iteration(s, hooks)?;
        }
        Ok(())
    }

    fn meta(&self, t: &TableRef) -> Option<&TableMeta> {
        self.tables.iter().find(|m| &m.table_ref() == t)
    }

    fn request(&self, payload: RequestPayload) -> AnalysisRequest {
        AnalysisRequest::new(&self.config.seed_context, payload)
    }

    fn table_context(&self, s: &RefineState, t: &TableRef, violations: Vec<String>) -> TableContext {
        let meta = self.meta(t).expect("graph tables come from the snapshot");
        let profile = self.ev.profiles.get(t);
        let pk: Vec<String> = self
            .ev
            .pks
            .primary_key(t)
            .map(|c| c.columns.clone())
            .unwrap_or_default();
        let columns = meta
            .columns
            .iter()
            .map(|c| {
                let p = profile.and_then(|p| p.column(&c.name));
                let references = s
                    .graph
                    .edges
                    .iter()
                    .find(|r| &r.source_table == t && r.source_columns == [c.name.clone()])
                    .map(|r| format!("{}.{}", r.target_table, r.target_columns.join(",")));
                let text = s.store.text(&ObjectId::Column(t.column(c.name.clone())));
                ColumnContext {
                    name: c.name.clone(),
                    data_type: c.canonical_type.as_str().to_string(),
                    nullable: c.nullable,
                    distinct_count: p.map_or(0, |p| p.distinct_count as u64),
                    null_fraction: p.map_or(0.0, |p| p.null_fraction),
                    sample_values: p.map(|p| p.sample_values.clone()).unwrap_or_default(),
                    is_primary_key: pk.contains(&c.name),
                    references,
                    description: (!text.is_empty()).then(|| text.to_string()),
                }
            })
            .collect();
        let neighbor = |n: &TableRef| NeighborDescription {
            table: n.clone(),
            description: s.store.text(&ObjectId::Table(n.clone())).to_string(),
            ground_truth: s.table_immutable(n),
        };
        let own = ObjectId::Table(t.clone());
        let prior = (s.iteration > 1).then(|| s.store.text(&own).to_string());
        TableContext {
            table: t.clone(),
            row_count: profile.map_or(meta.row_count, |p| p.row_count),
            iteration: s.iteration,
            columns,
            parents: s.graph.parents(t).iter().map(neighbor).collect(),
            ground_truth_neighbors: s
                .graph
                .children(t)
                .iter()
                .filter(|c| s.table_immutable(c))
                .map(neighbor)
                .collect(),
            known_tables: self.tables.iter().map(TableMeta::table_ref).collect(),
            prior_description: prior.filter(|p| !p.is_empty()),
            prior_reasoning: (s.iteration > 1)
                .then(|| s.store.get(&own).map(|r| r.reasoning.clone()).unwrap_or_default())
                .filter(|r| !r.is_empty()),
            violations,
        }
    }

    /// Admits every request, then issues them concurrently. Nothing is
    /// issued if any request is refused.
    fn call_all(
        &self,
        requests: &[AnalysisRequest],
        hooks: &mut dyn Hooks,
    ) -> Result<Vec<AnalysisResponse>, Halt> {
        let estimates: Vec<u64> = requests.iter().map(|r| r.estimated_input_tokens()).collect();
        for (r, e) in requests.iter().zip(&estimates) {
            if hooks.admit(r.kind(), *e) == Admission::Deny {
                return Err(Halt::Budget { kind: r.kind() });
            }
        }
        let width = self.config.parallelism.max(1);
        let mut results = Vec::with_capacity(requests.len());
        for chunk in requests.chunks(width) {
            let out: Vec<Result<AnalysisResponse, AnalyzerError>> = std::thread::scope(|scope| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|r| scope.spawn(move || analyzer::analyze(self.analyzer, r)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("analyzer call panicked"))
                    .collect()
            });
            results.extend(out);
        }
        let mut responses = Vec::with_capacity(results.len());
        for ((r, e), res) in requests.iter().zip(&estimates).zip(results) {
            let resp = res.map_err(Halt::Analyzer)?;
            hooks.settle(r.kind(), *e, resp.usage);
            responses.push(resp);
        }
        Ok(responses)
    }

    fn call_one(&self, request: AnalysisRequest, hooks: &mut dyn Hooks) -> Result<AnalysisResponse, Halt> {
        Ok(self.call_all(std::slice::from_ref(&request), hooks)?.remove(0))
    }

    fn analyze_tables(
        &self,
        s: &mut RefineState,
        tables: &[(TableRef, Vec<String>)],
        hooks: &mut dyn Hooks,
    ) -> Result<Vec<(TableRef, Vec<Insight>)>, Halt> {
        let requests: Vec<AnalysisRequest> = tables
            .iter()
            .map(|(t, v)| self.request(RequestPayload::TableAnalysis(self.table_context(s, t, v.clone()))))
            .collect();
        let responses = self.call_all(&requests, hooks)?;
        s.counters.analysis_calls += responses.len();
        let mut out = Vec::new();
        for ((t, _), resp) in tables.iter().zip(responses) {
            let ResponsePayload::TableAnalysis(a) = resp.payload else {
                unreachable!("validated response kind");
            };
            let insights = self.apply_analysis(s, t, &a);
            self.feed_discovery(s, t, &a);
            s.analyzed.insert(t.clone());
            out.push((t.clone(), insights));
        }
        Ok(out)
    }

    fn apply_analysis(&self, s: &mut RefineState, t: &TableRef, a: &TableAnalysis) -> Vec<Insight> {
        let i = s.iteration;
        s.store.update(
            &ObjectId::Table(t.clone()),
            i,
            &a.table_description,
            a.confidence,
            &a.reasoning,
            EntrySource::Analysis,
        );
        for c in &a.columns {
            s.store.update(
                &ObjectId::Column(t.column(c.name.clone())),
                i,
                &c.description,
                c.confidence,
                "",
                EntrySource::Analysis,
            );
        }
        let parents = s.graph.parents(t);
        a.parent_insights
            .iter()
            .filter_map(|p| {
                let parent = parents.iter().find(|x| x.to_string() == p.parent_table)?;
                Some(Insight {
                    from_table: t.clone(),
                    about_parent: parent.clone(),
                    text: p.insight.clone(),
                    confidence: p.confidence,
                    iteration: i,
                })
            })
            .collect()
    }

    fn feed_discovery(&self, s: &mut RefineState, t: &TableRef, a: &TableAnalysis) {
        for fk in &a.foreign_keys {
            let proposal = ProposedFk {
                source_table: t.to_string(),
                source_column: fk.source_column.clone(),
                target_table: fk.target_table.clone(),
                target_column: fk.target_column.clone(),
            };
            let linked = s
                .graph
                .edges
                .iter()
                .any(|r| &r.source_table == t && r.source_columns == [fk.source_column.clone()]);
            if linked || s.proposals.iter().any(|p| p.proposal == proposal) {
                continue;
            }
            let outcome = match validate_proposed_fk(
                &self.ev.input,
                self.ev.profiles,
                self.ev.pks,
                self.ev.fk_config,
                self.ev.adaptive,
                &proposal,
            ) {
                Ok(c) => {
                    s.graph.add_context_edge(c.relationship());
                    ProposalOutcome {
                        iteration: s.iteration,
                        proposal,
                        accepted: true,
                        score: Some(c.score),
                        reason: None,
                    }
                }
                Err(r) => ProposalOutcome {
                    iteration: s.iteration,
                    proposal,
                    accepted: false,
                    score: r.candidate.as_ref().map(|c| c.score),
                    reason: Some(r.reason),
                },
            };
            s.proposals.push(outcome);
        }
    }

    fn reanalyze_queue(&self, s: &mut RefineState, hooks: &mut dyn Hooks) -> Result<(), Halt> {
        let queue: Vec<(TableRef, Vec<String>)> = std::mem::take(&mut s.requeue)
            .into_iter()
            .filter(|(t, _)| !s.table_immutable(t) && self.meta(t).is_some())
            .collect();
        if queue.is_empty() {
            return Ok(());
        }
        s.counters.requeued += queue.len();
        for (t, insights) in self.analyze_tables(s, &queue, hooks)? {
            s.deferred_insights.insert(t, insights);
        }
        Ok(())
    }

    fn process_level(&self, s: &mut RefineState, level: usize, hooks: &mut dyn Hooks) -> Result<(), Halt> {
        let members = s.graph.levels[level].clone();
        let todo: Vec<(TableRef, Vec<String>)> = members
            .iter()
            .filter(|t| !s.table_immutable(t) && !s.analyzed.contains(*t))
            .map(|t| (t.clone(), Vec::new()))
            .collect();
        let mut insights: Vec<Insight> = Vec::new();
        for t in &members {
            if let Some(d) = s.deferred_insights.remove(t) {
                insights.extend(d);
            }
        }
        for (_, i) in self.analyze_tables(s, &todo, hooks)? {
            insights.extend(i);
        }

        let scope: BTreeSet<TableRef> = members.iter().cloned().collect();
        let found = self.check(s, &scope, RequestKind::SanityLevel, &format!("level-{level}"), hooks)?;
        let mut by_table: BTreeMap<TableRef, Vec<String>> = BTreeMap::new();
        for v in found {
            if v.rule.requeues() {
                s.requeue_next.entry(v.table.clone()).or_default().push(v.message.clone());
            }
            by_table.entry(v.table.clone()).or_default().push(v.message.clone());
            s.counters.violations += 1;
            s.violations.push(v);
        }

        let mut grouped: BTreeMap<TableRef, Vec<Insight>> = BTreeMap::new();
        for i in &insights {
            grouped.entry(i.about_parent.clone()).or_default().push(i.clone());
        }
        s.insights.extend(insights);
        for (parent, pi) in grouped {
            if s.table_immutable(&parent) || pi.is_empty() {
                continue;
            }
            let id = ObjectId::Table(parent.clone());
            let current = s.store.get(&id).expect("parent is a known table").clone();
            let req = self.request(RequestPayload::Revision(RevisionContext {
                table: parent.clone(),
                current_description: current.text.clone(),
                current_confidence: current.confidence,
                insights: pi,
                violations: by_table.get(&parent).cloned().unwrap_or_default(),
            }));
            let ResponsePayload::Revision(rev) = self.call_one(req, hooks)?.payload else {
                unreachable!("validated response kind");
            };
            match rev.revised_description.filter(|_| rev.needs_revision) {
                Some(text) => {
                    s.store.update(&id, s.iteration, &text, rev.confidence, &rev.reasoning, EntrySource::Revision);
                    s.counters.revisions_changed += 1;
                }
                None => {
                    s.store.keep(&id, s.iteration, rev.confidence, &rev.reasoning);
                    s.counters.revisions_unchanged += 1;
                }
            }
        }
        Ok(())
    }

    /// Structural rules plus the analyzer review for one scope.
    fn check(
        &self,
        s: &RefineState,
        scope: &BTreeSet<TableRef>,
        kind: RequestKind,
        label: &str,
        hooks: &mut dyn Hooks,
    ) -> Result<Vec<Violation>, Halt> {
        let rules = &self.config.sanity_rules;
        let facts = KeyFacts {
            input: self.ev.input,
            pks: self.ev.pks,
            relationships: &s.graph.edges,
        };
        let mut out: Vec<Violation> = structural_violations(scope, &facts, rules)
            .into_iter()
            .map(|(rule, table, message)| Violation {
                rule,
                table,
                message,
                scope: label.to_string(),
                iteration: s.iteration,
            })
            .collect();
        if rules.r5 && !scope.is_empty() {
            let ctx = SanityContext {
                scope: label.to_string(),
                tables: scope
                    .iter()
                    .map(|t| SanityTable {
                        table: t.clone(),
                        description: s.store.text(&ObjectId::Table(t.clone())).to_string(),
                        parents: s.graph.parents(t).into_iter().collect(),
                    })
                    .collect(),
            };
            let payload = match kind {
                RequestKind::SanityLevel => RequestPayload::SanityLevel(ctx),
                RequestKind::SanitySchema => RequestPayload::SanitySchema(ctx),
                _ => RequestPayload::SanityCross(ctx),
            };
            let ResponsePayload::Sanity(report) = self.call_one(self.request(payload), hooks)?.payload else {
                unreachable!("validated response kind");
            };
            for issue in report.issues {
                let table = scope
                    .iter()
                    .find(|t| t.to_string() == issue.table)
                    .expect("validated issue table")
                    .clone();
                out.push(Violation {
                    rule: Rule::R5,
                    table,
                    message: issue.message,
                    scope: label.to_string(),
                    iteration: s.iteration,
                });
            }
        }
        Ok(out)
    }

    fn classify(&self, id: &ObjectId, old: &str, new: &str, hooks: &mut dyn Hooks) -> Result<ChangeClass, Halt> {
        if old.trim().is_empty() {
            return Ok(ChangeClass::Material);
        }
        let req = self.request(RequestPayload::SemanticComparison(ComparisonContext {
            object: id.to_string(),
            old_description: old.to_string(),
            new_description: new.to_string(),
        }));
        let estimate = req.estimated_input_tokens();
        match hooks.admit(req.kind(), estimate) {
            Admission::Allow => {}
            Admission::Degrade | Admission::Deny => return Ok(exact_match_class(old, new)),
        }
        let resp = analyzer::analyze(self.analyzer, &req).map_err(Halt::Analyzer)?;
        hooks.settle(req.kind(), estimate, resp.usage);
        match resp.payload {
            ResponsePayload::SemanticComparison(v) => Ok(v.classification),
            _ => unreachable!("validated response kind"),
        }
    }

    fn close_iteration(&self, s: &mut RefineState, hooks: &mut dyn Hooks) -> Result<(), Halt> {
        let mut summary = s.counters.clone();
        let current = s.store.texts();
        for (id, text) in &current {
            let old = s.iteration_start.get(id).map_or("", String::as_str);
            if old == text {
                continue;
            }
            summary.changed += 1;
            match self.classify(id, old, text, hooks)? {
                ChangeClass::Material => summary.material += 1,
                ChangeClass::Cosmetic => summary.cosmetic += 1,
            }
        }
        summary.min_table_confidence = s
            .store
            .records()
            .filter(|r| matches!(r.object, ObjectId::Table(_)))
            .map(|r| r.confidence)
            .fold(1.0, f64::min);
        let mut history = s.iterations.clone();
        history.push(summary.clone());
        summary.status = check_convergence(&history, &self.config.convergence);
        s.iterations.push(summary.clone());

        if summary.status.converged || s.iteration >= self.config.convergence.max_iterations {
            s.finished = true;
            s.converged = summary.status.converged;
            return Ok(());
        }
        s.iteration += 1;
        s.next_level = 0;
        s.requeue_done = false;
        s.requeue = std::mem::take(&mut s.requeue_next);
        s.analyzed.clear();
        s.deferred_insights.clear();
        s.counters = empty_summary(s.iteration);
        s.iteration_start = current;
        Ok(())
    }
}

/// Fallback classification when optional comparison calls are skipped:
/// only whitespace differences are cosmetic.
pub fn exact_match_class(old: &str, new: &str) -> ChangeClass {
    let squash = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
    if squash(old) == squash(new) {
        ChangeClass::Cosmetic
    } else {
        ChangeClass::Material
    }
}

/// Schema-level checks for every schema, then one cross-schema review.
pub fn final_sanity(
    state: &RefineState,
    tables: &[TableMeta],
    ev: &Evidence<'_>,
    analyzer: &dyn Analyzer,
    config: &RefineConfig,
    hooks: &mut dyn Hooks,
) -> Result<Vec<Violation>, Halt> {
    let engine = Engine {
        tables,
        ev,
        analyzer,
        config,
    };
    let mut schemas: BTreeMap<&str, BTreeSet<TableRef>> = BTreeMap::new();
    for t in tables {
        schemas.entry(&t.schema_name).or_default().insert(t.table_ref());
    }
    let mut out = Vec::new();
    for (name, scope) in &schemas {
        out.extend(engine.check(state, scope, RequestKind::SanitySchema, &format!("schema:{name}"), hooks)?);
    }
    if engine.config.sanity_rules.r5 {
        let all: BTreeSet<TableRef> = tables.iter().map(TableMeta::table_ref).collect();
        let no_structural = RefineConfig {
            sanity_rules: SanityRules {
                r1: false,
                r2: false,
                r3: false,
                r4: false,
                r5: true,
                r6: false,
            },
            ..config.clone()
        };
        let cross = Engine {
            config: &no_structural,
            ..engine
        };
        out.extend(cross.check(state, &all, RequestKind::SanityCross, "cross-schema", hooks)?);
    }
    Ok(out)
}
