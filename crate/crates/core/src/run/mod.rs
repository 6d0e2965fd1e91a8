//! Phase orchestration, guardrails and resumable run state.
//!
//! Phases run in the order ingest, discovery, refinement, final sanity,
//! outputs. The state file is rewritten after every phase and after every
//! refinement step, so a run can be resumed from where it stopped.

mod budget;
mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analyzer::templates::Templates;
use crate::analyzer::{
    self, AnalysisRequest, Analyzer, ColumnContext, FkOption, FkPruningContext, HttpAnalyzer,
    MockAnalyzer, PkOption, PkPruningContext, RequestKind, RequestPayload, ResponsePayload,
    TokenUsage,
};
use crate::discovery::{self, DiscoveryResult};
use crate::error::RunError;
use crate::eval::{self, Detected, EvalReport};
use crate::ingest::{load_snapshot, SchemaSnapshot, TruthFile};
use crate::model::{build_dependency_graph, Relationship, TableMeta, TableRef};
use crate::output::{self, DocView};
use crate::refine::{
    self, Admission, DescriptionStore, Evidence, Flow, Halt, Hooks, RefineState, Violation,
};
use crate::stats::{self, ProfileOptions, SchemaProfiles};

pub use budget::{precheck_budget, BudgetPhase, Guardrails, PhaseShares, Precheck, Prices, Usage};
pub use config::{AnalyzerSettings, Provider, RunConfig, SchemaFilter, TableFilter};

pub const STATE_FILE: &str = "state.json";
pub const OUTPUTS_DIR: &str = "outputs";
pub const STATE_FORMAT_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Phase {
    Ingest,
    Discovery,
    Refinement,
    FinalSanity,
    Outputs,
}

impl Phase {
    pub const ALL: [Phase; 5] = [
        Phase::Ingest,
        Phase::Discovery,
        Phase::Refinement,
        Phase::FinalSanity,
        Phase::Outputs,
    ];

    /// Pipeline phase number; 5 (query generation) is not part of this tool.
    pub fn number(self) -> u8 {
        match self {
            Phase::Ingest => 1,
            Phase::Discovery => 2,
            Phase::Refinement => 3,
            Phase::FinalSanity => 4,
            Phase::Outputs => 6,
        }
    }

    fn budget(self) -> BudgetPhase {
        match self {
            Phase::Ingest | Phase::Discovery => BudgetPhase::Discovery,
            Phase::Refinement => BudgetPhase::Analysis,
            Phase::FinalSanity | Phase::Outputs => BudgetPhase::Sanity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PhaseStatus {
    Pending,
    InProgress,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Breach {
    pub phase: Phase,
    pub kind: RequestKind,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PruningRecord {
    pub kind: RequestKind,
    /// Table for key pruning, `schema.table.column` for reference pruning.
    pub subject: String,
    pub kept: Vec<String>,
    pub dropped: Vec<String>,
    pub reasoning: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunState {
    pub format_version: String,
    pub run_number: u32,
    pub config_digest: String,
    pub config: RunConfig,
    pub phases: BTreeMap<Phase, PhaseStatus>,
    pub tables: Vec<TableMeta>,
    pub profiles: SchemaProfiles,
    pub discovery: Option<DiscoveryResult>,
    pub pruning: Vec<PruningRecord>,
    pub refinement: Option<RefineState>,
    pub final_violations: Vec<Violation>,
    /// Usage of committed work only.
    pub usage: Usage,
    /// Usage of calls whose results were thrown away by a halt.
    pub discarded_usage: TokenUsage,
    /// Optional calls skipped past the warning threshold.
    pub degraded_calls: u64,
    pub elapsed_seconds: f64,
    pub breach: Option<Breach>,
}

impl RunState {
    fn new(run_number: u32, config: RunConfig) -> Self {
        Self {
            format_version: STATE_FORMAT_VERSION.into(),
            run_number,
            config_digest: config.digest(),
            config,
            phases: Phase::ALL.iter().map(|p| (*p, PhaseStatus::Pending)).collect(),
            tables: Vec::new(),
            profiles: SchemaProfiles::new(),
            discovery: None,
            pruning: Vec::new(),
            refinement: None,
            final_violations: Vec::new(),
            usage: Usage::default(),
            discarded_usage: TokenUsage::default(),
            degraded_calls: 0,
            elapsed_seconds: 0.0,
            breach: None,
        }
    }

    pub fn status(&self, phase: Phase) -> PhaseStatus {
        self.phases.get(&phase).copied().unwrap_or(PhaseStatus::Pending)
    }

    pub fn is_complete(&self) -> bool {
        Phase::ALL.iter().all(|p| self.status(*p) == PhaseStatus::Complete)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("state serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let s: RunState = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if s.format_version != STATE_FORMAT_VERSION {
            return Err(format!("unsupported state format version `{}`", s.format_version));
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|source| RunError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|message| RunError::State {
            path: path.to_path_buf(),
            message,
        })
    }

    /// Detected primary key per table.
    pub fn primary_keys(&self) -> BTreeMap<TableRef, Vec<String>> {
        let Some(d) = &self.discovery else {
            return BTreeMap::new();
        };
        self.tables
            .iter()
            .filter_map(|t| {
                let tr = t.table_ref();
                d.pks.primary_key(&tr).map(|c| (tr, c.columns.clone()))
            })
            .collect()
    }

    /// Accepted relationships, including ones proposed during refinement.
    pub fn relationships(&self) -> Vec<Relationship> {
        match (&self.refinement, &self.discovery) {
            (Some(r), _) => r.graph.edges.clone(),
            (None, Some(d)) => d.relationships(),
            (None, None) => Vec::new(),
        }
    }

    /// Descriptions, or the catalog descriptions plus ground truth when
    /// refinement has not started.
    pub fn descriptions(&self) -> DescriptionStore {
        match &self.refinement {
            Some(r) => r.store.clone(),
            None => {
                let mut s = DescriptionStore::new(&self.tables);
                s.apply_ground_truth(&self.config.ground_truth);
                s
            }
        }
    }

    pub fn detected(&self) -> Detected {
        Detected {
            primary_keys: self.primary_keys().into_iter().collect(),
            foreign_keys: self
                .relationships()
                .into_iter()
                .filter(|r| r.source_columns.len() == 1)
                .map(|r| {
                    (
                        r.source_table,
                        r.source_columns[0].clone(),
                        r.target_table,
                        r.target_columns[0].clone(),
                    )
                })
                .collect(),
        }
    }

    pub fn compare(&self, truth: &TruthFile) -> EvalReport {
        let store = self.refinement.as_ref().map(|r| &r.store);
        eval::compare(&self.detected(), truth, &self.tables, store)
    }

    /// Run summary written to `metrics/metrics.json`. Contains no timing
    /// and no run number so bundles of equivalent runs are identical.
    pub fn metrics_report(&self) -> String {
        let store = self.descriptions();
        let (table_cov, column_cov) = eval::coverage(&self.tables, Some(&store));
        let count_rules = |vs: &[Violation]| {
            let mut m: BTreeMap<String, usize> = BTreeMap::new();
            for v in vs {
                *m.entry(v.rule.to_string()).or_default() += 1;
            }
            m
        };
        let refinement = self.refinement.as_ref();
        let proposals = refinement.map(|r| r.proposals.as_slice()).unwrap_or_default();
        let report = serde_json::json!({
            "discovery": self.discovery.as_ref().map(|d| serde_json::json!({
                "primaryKeys": self.primary_keys().len(),
                "relationships": d.fks.accepted().count(),
                "adaptiveWeights": d.fks.adaptive,
                "weights": d.fks.weights,
                "zeroKeyFraction": d.fks.zero_k_fraction,
                "pruning": self.pruning.iter().map(|p| serde_json::json!({
                    "kind": p.kind,
                    "subject": p.subject,
                    "dropped": p.dropped,
                })).collect::<Vec<_>>(),
            })),
            "refinement": refinement.map(|r| serde_json::json!({
                "converged": r.converged,
                "iterations": r.iterations,
                "proposalsAccepted": proposals.iter().filter(|p| p.accepted).count(),
                "proposalsRejected": proposals.iter().filter(|p| !p.accepted).count(),
                "violationsByRule": count_rules(&r.violations),
            })),
            "finalViolationsByRule": count_rules(&self.final_violations),
            "coverage": {"tables": table_cov, "columns": column_cov},
            "tokens": {
                "byPhase": self.usage.by_phase,
                "byKind": self.usage.by_kind,
                "calls": self.usage.calls,
                "total": self.usage.total(),
            },
        });
        let mut s = serde_json::to_string_pretty(&report).expect("metrics serialize");
        s.push('\n');
        s
    }

    pub fn bundle(&self) -> BTreeMap<String, String> {
        let store = self.descriptions();
        let pks = self.primary_keys();
        let rels = self.relationships();
        let view = DocView {
            tables: &self.tables,
            store: &store,
            primary_keys: &pks,
            relationships: &rels,
        };
        output::emit_bundle(&view, &self.metrics_report(), &self.config.outputs)
    }
}

/// Simulated interruption points for exercising resume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopPoint {
    AfterPhase(Phase),
    /// After the given refinement level of the given iteration.
    AfterLevel { iteration: usize, level: usize },
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Phases 1 and 2 only.
    pub dry_run: bool,
    pub stop: Option<StopPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed,
    DryRun,
    Halted(Breach),
    Stopped,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub state_path: PathBuf,
    pub status: RunStatus,
    pub state: RunState,
}

pub fn build_analyzer(config: &RunConfig) -> Result<Box<dyn Analyzer>, RunError> {
    Ok(match config.analyzer.provider {
        Provider::Mock => Box::new(MockAnalyzer),
        Provider::Http => {
            let templates = match &config.analyzer.templates_dir {
                Some(d) => Templates::load_dir(d)?,
                None => Templates::builtin(),
            };
            Box::new(HttpAnalyzer::new(config.analyzer.http.clone(), templates)?)
        }
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Highest existing `run-<n>` under `root`, or 0.
pub fn last_run_number(root: &Path) -> Result<u32, RunError> {
    if !root.exists() {
        return Ok(0);
    }
    let mut max = 0;
    for entry in std::fs::read_dir(root).map_err(io_err(root))? {
        let entry = entry.map_err(io_err(root))?;
        if let Some(n) = entry
            .file_name()
            .to_str()
            .and_then(|n| n.strip_prefix("run-"))
            .and_then(|n| n.parse::<u32>().ok())
        {
            max = max.max(n);
        }
    }
    Ok(max)
}

/// Starts a new numbered run under the configured output root.
pub fn orchestrate(config: RunConfig, analyzer: &dyn Analyzer, options: &RunOptions) -> Result<RunOutcome, RunError> {
    config.validate()?;
    let root = config.output_root.clone();
    let number = last_run_number(&root)? + 1;
    let run_dir = root.join(format!("run-{number}"));
    std::fs::create_dir_all(&run_dir).map_err(io_err(&run_dir))?;
    log::info!("starting run {number} in {}", run_dir.display());
    Runner::new(run_dir, RunState::new(number, config), analyzer, options).drive()
}

/// Continues a stopped run in its own directory. A supplied config must
/// have the digest recorded in the state; its guardrails and output
/// toggles replace the stored ones.
pub fn resume(
    state_path: &Path,
    config: Option<RunConfig>,
    analyzer: &dyn Analyzer,
    options: &RunOptions,
) -> Result<RunOutcome, RunError> {
    let mut state = RunState::load(state_path)?;
    if let Some(c) = config {
        c.validate()?;
        let found = c.digest();
        if found != state.config_digest {
            return Err(RunError::DigestMismatch {
                expected: state.config_digest.clone(),
                found,
            });
        }
        state.config = c;
    } else if state.config.digest() != state.config_digest {
        return Err(RunError::DigestMismatch {
            expected: state.config_digest.clone(),
            found: state.config.digest(),
        });
    }
    state.breach = None;
    let run_dir = state_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    log::info!("resuming run {} in {}", state.run_number, run_dir.display());
    Runner::new(run_dir, state, analyzer, options).drive()
}

struct Runner<'a> {
    run_dir: PathBuf,
    state: RunState,
    analyzer: &'a dyn Analyzer,
    options: &'a RunOptions,
    started: Instant,
    base_elapsed: f64,
    warned: bool,
}

enum Step {
    Next,
    End(RunStatus),
}

impl<'a> Runner<'a> {
    fn new(run_dir: PathBuf, state: RunState, analyzer: &'a dyn Analyzer, options: &'a RunOptions) -> Self {
        let base_elapsed = state.elapsed_seconds;
        Self {
            run_dir,
            state,
            analyzer,
            options,
            started: Instant::now(),
            base_elapsed,
            warned: false,
        }
    }

    fn state_path(&self) -> PathBuf {
        self.run_dir.join(STATE_FILE)
    }

    fn elapsed(&self) -> f64 {
        self.base_elapsed + self.started.elapsed().as_secs_f64()
    }

    fn save(&mut self) -> Result<(), RunError> {
        self.state.elapsed_seconds = self.elapsed();
        save_state(&self.state_path(), &self.state)
    }

    fn drive(mut self) -> Result<RunOutcome, RunError> {
        let mut snapshot: Option<SchemaSnapshot> = None;
        let mut status = RunStatus::Completed;
        for phase in Phase::ALL {
            if self.state.status(phase) == PhaseStatus::Complete && phase != Phase::Ingest {
                continue;
            }
            if self.options.dry_run && phase > Phase::Discovery {
                status = RunStatus::DryRun;
                break;
            }
            let fresh = self.state.status(phase) != PhaseStatus::Complete;
            if fresh {
                log::info!("phase {}: {:?}", phase.number(), phase);
                self.state.phases.insert(phase, PhaseStatus::InProgress);
            }
            let step = match phase {
                Phase::Ingest => self.ingest(&mut snapshot, fresh)?,
                Phase::Discovery => self.discovery(snapshot.as_ref().expect("ingested"))?,
                Phase::Refinement => self.refinement(snapshot.as_ref().expect("ingested"))?,
                Phase::FinalSanity => self.final_sanity(snapshot.as_ref().expect("ingested"))?,
                Phase::Outputs => self.outputs()?,
            };
            if let Step::End(s) = step {
                status = s;
                break;
            }
            if fresh {
                self.state.phases.insert(phase, PhaseStatus::Complete);
                self.save()?;
                if self.options.stop == Some(StopPoint::AfterPhase(phase)) {
                    status = RunStatus::Stopped;
                    break;
                }
            }
        }
        if status == RunStatus::DryRun {
            self.write_outputs()?;
        }
        self.save()?;
        Ok(RunOutcome {
            state_path: self.state_path(),
            run_dir: self.run_dir,
            status,
            state: self.state,
        })
    }

    /// Loads the snapshot every time; profiles are computed only once.
    fn ingest(&mut self, snapshot: &mut Option<SchemaSnapshot>, fresh: bool) -> Result<Step, RunError> {
        let config = &self.state.config;
        let snap = load_snapshot(&config.snapshot)?.filtered(&config.filters());
        if fresh {
            let input = snap.discovery_input();
            self.state.profiles = stats::profile_schema(
                &input,
                config.sample_size,
                config.seed,
                ProfileOptions {
                    cardinality_threshold: config.cardinality_threshold,
                },
            );
            self.state.tables = snap.tables.clone();
        } else if snap.tables != self.state.tables {
            return Err(RunError::Config(format!(
                "snapshot {} no longer matches the tables recorded in the run state",
                config.snapshot.display()
            )));
        }
        *snapshot = Some(snap);
        Ok(Step::Next)
    }

    fn meter(&mut self, phase: Phase) -> Meter<'_> {
        Meter {
            guard: self.state.config.guardrails,
            phase: phase.budget(),
            committed: &mut self.state.usage,
            pending: Usage::default(),
            degraded: &mut self.state.degraded_calls,
            elapsed: self.base_elapsed + self.started.elapsed().as_secs_f64(),
            warned: &mut self.warned,
            denial: None,
        }
    }

    fn halt(&mut self, phase: Phase, kind: RequestKind, reason: String, discarded: TokenUsage) -> Result<Step, RunError> {
        log::warn!("guardrail stop in phase {}: {reason}", phase.number());
        self.state.discarded_usage.add(discarded);
        let breach = Breach { phase, kind, reason };
        self.state.breach = Some(breach.clone());
        self.save()?;
        Ok(Step::End(RunStatus::Halted(breach)))
    }

    fn discovery(&mut self, snapshot: &SchemaSnapshot) -> Result<Step, RunError> {
        let input = snapshot.discovery_input();
        let mut result = discovery::discover(&input, &self.state.profiles, &self.state.config.discovery);
        let requests = pruning_requests(&self.state, &result, snapshot);
        let seed = self.state.config.seed_context.clone();
        let analyzer = self.analyzer;
        let mut meter = self.meter(Phase::Discovery);
        let mut records = Vec::new();
        for payload in requests {
            let req = AnalysisRequest::new(&seed, payload);
            let estimate = req.estimated_input_tokens();
            if meter.admit(req.kind(), estimate) == Admission::Deny {
                let (reason, pending) = (meter.denial.take().unwrap_or_default(), meter.pending.total());
                return self.halt(Phase::Discovery, req.kind(), reason, pending);
            }
            let resp = match analyzer::analyze(analyzer, &req) {
                Ok(r) => r,
                Err(e) => {
                    let pending = meter.pending.total();
                    self.state.discarded_usage.add(pending);
                    self.save()?;
                    return Err(e.into());
                }
            };
            meter.settle(req.kind(), resp.usage);
            records.push(apply_pruning(&mut result, &req.payload, resp.payload));
        }
        meter.commit();
        self.state.pruning = records;
        self.state.discovery = Some(result);
        Ok(Step::Next)
    }

    fn refinement(&mut self, snapshot: &SchemaSnapshot) -> Result<Step, RunError> {
        let discovery = self.state.discovery.clone().expect("discovery completed");
        if self.state.refinement.is_none() {
            let graph = build_dependency_graph(&self.state.tables, &discovery.relationships())?;
            let rs = RefineState::new(&self.state.tables, graph, &self.state.config.ground_truth)?;
            self.state.refinement = Some(rs);
        }
        self.save()?;
        let profiles = self.state.profiles.clone();
        let fk_config = self.state.config.discovery.fk.clone();
        let evidence = Evidence {
            input: snapshot.discovery_input(),
            profiles: &profiles,
            pks: &discovery.pks,
            fk_config: &fk_config,
            adaptive: discovery.fks.adaptive,
        };
        let tables = self.state.tables.clone();
        let config = self.state.config.refine_config();
        let mut rs = self.state.refinement.clone().expect("initialized above");
        let stop = self.options.stop;
        let state_path = self.state_path();
        let analyzer = self.analyzer;
        let started = self.started;
        let base = self.base_elapsed;
        let (result, denial, pending) = {
            let snapshot_state = &mut self.state;
            let mut hooks = PersistingHooks {
                meter: Meter {
                    guard: snapshot_state.config.guardrails,
                    phase: BudgetPhase::Analysis,
                    committed: &mut snapshot_state.usage,
                    pending: Usage::default(),
                    degraded: &mut snapshot_state.degraded_calls,
                    elapsed: base + started.elapsed().as_secs_f64(),
                    warned: &mut self.warned,
                    denial: None,
                },
                refinement: &mut snapshot_state.refinement,
                elapsed_seconds: &mut snapshot_state.elapsed_seconds,
                started,
                base,
                path: &state_path,
                stop,
                error: None,
                frozen: None,
            };
            let r = refine::run_iterations(&mut rs, &tables, &evidence, analyzer, &config, &mut hooks);
            let pending = hooks.meter.pending.total();
            let denial = hooks.meter.denial.take();
            if let Some(e) = hooks.error.take() {
                return Err(e);
            }
            (r, denial, pending)
        };
        match result {
            Ok(()) => {
                self.state.refinement = Some(rs);
                Ok(Step::Next)
            }
            Err(Halt::Stopped) => Ok(Step::End(RunStatus::Stopped)),
            Err(Halt::Budget { kind }) => self.halt(Phase::Refinement, kind, denial.unwrap_or_default(), pending),
            Err(Halt::Analyzer(e)) => {
                self.state.discarded_usage.add(pending);
                self.save()?;
                Err(e.into())
            }
        }
    }

    fn final_sanity(&mut self, snapshot: &SchemaSnapshot) -> Result<Step, RunError> {
        let discovery = self.state.discovery.clone().expect("discovery completed");
        let rs = self.state.refinement.clone().expect("refinement completed");
        let profiles = self.state.profiles.clone();
        let fk_config = self.state.config.discovery.fk.clone();
        let evidence = Evidence {
            input: snapshot.discovery_input(),
            profiles: &profiles,
            pks: &discovery.pks,
            fk_config: &fk_config,
            adaptive: discovery.fks.adaptive,
        };
        let tables = self.state.tables.clone();
        let config = self.state.config.refine_config();
        let analyzer = self.analyzer;
        let mut meter = self.meter(Phase::FinalSanity);
        let result = refine::final_sanity(&rs, &tables, &evidence, analyzer, &config, &mut meter);
        match result {
            Ok(v) => {
                meter.commit();
                self.state.final_violations = v;
                Ok(Step::Next)
            }
            Err(Halt::Budget { kind }) => {
                let (reason, pending) = (meter.denial.take().unwrap_or_default(), meter.pending.total());
                self.halt(Phase::FinalSanity, kind, reason, pending)
            }
            Err(Halt::Analyzer(e)) => {
                let pending = meter.pending.total();
                self.state.discarded_usage.add(pending);
                self.save()?;
                Err(e.into())
            }
            Err(Halt::Stopped) => Ok(Step::End(RunStatus::Stopped)),
        }
    }

    fn outputs(&mut self) -> Result<Step, RunError> {
        self.write_outputs()?;
        Ok(Step::Next)
    }

    fn write_outputs(&self) -> Result<(), RunError> {
        let dir = self.run_dir.join(OUTPUTS_DIR);
        for (name, text) in self.state.bundle() {
            let path = dir.join(&name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(io_err(parent))?;
            }
            std::fs::write(&path, text).map_err(io_err(&path))?;
        }
        Ok(())
    }
}

pub fn save_state(path: &Path, state: &RunState) -> Result<(), RunError> {
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, state.to_json()).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

/// Budget bookkeeping for one phase. Usage stays pending until the work
/// that produced it is committed.
struct Meter<'a> {
    guard: Guardrails,
    phase: BudgetPhase,
    committed: &'a mut Usage,
    pending: Usage,
    degraded: &'a mut u64,
    elapsed: f64,
    warned: &'a mut bool,
    denial: Option<String>,
}

impl Meter<'_> {
    fn commit(&mut self) {
        self.committed.merge(&self.pending);
        self.pending = Usage::default();
    }

    fn admit(&mut self, kind: RequestKind, estimate: u64) -> Admission {
        let mut used = self.committed.clone();
        used.merge(&self.pending);
        match precheck_budget(&self.guard, &used, self.phase, estimate, self.elapsed) {
            Precheck::Allow => Admission::Allow,
            Precheck::Warn => {
                if !*self.warned {
                    log::warn!("guardrail warning threshold reached; skipping optional analyzer calls");
                    *self.warned = true;
                }
                if kind == RequestKind::SemanticComparison {
                    *self.degraded += 1;
                }
                Admission::Degrade
            }
            Precheck::Deny(reason) => {
                if kind == RequestKind::SemanticComparison {
                    *self.degraded += 1;
                } else {
                    self.denial = Some(reason);
                }
                Admission::Deny
            }
        }
    }

    fn settle(&mut self, kind: RequestKind, usage: TokenUsage) {
        self.pending.record(self.phase, kind, usage);
    }
}

impl Hooks for Meter<'_> {
    fn admit(&mut self, kind: RequestKind, estimated_tokens: u64) -> Admission {
        Meter::admit(self, kind, estimated_tokens)
    }

    fn settle(&mut self, kind: RequestKind, _estimated_tokens: u64, usage: TokenUsage) {
        Meter::settle(self, kind, usage)
    }

    fn checkpoint(&mut self, _: &RefineState) -> Flow {
        Flow::Continue
    }
}

/// Refinement hooks that commit usage and rewrite the state file at every
/// engine checkpoint.
struct PersistingHooks<'a> {
    meter: Meter<'a>,
    refinement: &'a mut Option<RefineState>,
    elapsed_seconds: &'a mut f64,
    started: Instant,
    base: f64,
    path: &'a Path,
    stop: Option<StopPoint>,
    error: Option<RunError>,
    /// Everything in the state file except the fields this hook updates.
    frozen: Option<serde_json::Value>,
}

impl Hooks for PersistingHooks<'_> {
    fn admit(&mut self, kind: RequestKind, estimated_tokens: u64) -> Admission {
        self.meter.elapsed = self.base + self.started.elapsed().as_secs_f64();
        self.meter.admit(kind, estimated_tokens)
    }

    fn settle(&mut self, kind: RequestKind, _estimated_tokens: u64, usage: TokenUsage) {
        self.meter.settle(kind, usage)
    }

    fn checkpoint(&mut self, state: &RefineState) -> Flow {
        self.meter.commit();
        *self.refinement = Some(state.clone());
        *self.elapsed_seconds = self.base + self.started.elapsed().as_secs_f64();
        if let Err(e) = self.persist() {
            self.error = Some(e);
            return Flow::Stop;
        }
        match self.stop {
            Some(StopPoint::AfterLevel { iteration, level })
                if state.iteration == iteration && state.requeue_done && state.next_level == level + 1 =>
            {
                Flow::Stop
            }
            _ => Flow::Continue,
        }
    }
}

impl PersistingHooks<'_> {
    /// Rewrites the state file from the on-disk copy with the live
    /// refinement, usage and clock fields swapped in.
    fn persist(&mut self) -> Result<(), RunError> {
        if self.frozen.is_none() {
            let text = std::fs::read_to_string(self.path).map_err(io_err(self.path))?;
            self.frozen = Some(serde_json::from_str(&text).map_err(|e| RunError::State {
                path: self.path.to_path_buf(),
                message: e.to_string(),
            })?);
        }
        let mut value = self.frozen.clone().expect("loaded above");
        let map = value.as_object_mut().expect("state is an object");
        let json = |v: serde_json::Result<serde_json::Value>| v.expect("state fields serialize");
        map.insert("refinement".into(), json(serde_json::to_value(&*self.refinement)));
        map.insert("usage".into(), json(serde_json::to_value(&*self.meter.committed)));
        map.insert("degradedCalls".into(), json(serde_json::to_value(*self.meter.degraded)));
        map.insert("elapsedSeconds".into(), json(serde_json::to_value(*self.elapsed_seconds)));
        let state: RunState = serde_json::from_value(value).map_err(|e| RunError::State {
            path: self.path.to_path_buf(),
            message: e.to_string(),
        })?;
        save_state(self.path, &state)
    }
}

fn column_contexts(meta: &TableMeta, profiles: &SchemaProfiles, pk: &[String]) -> Vec<ColumnContext> {
    let profile = profiles.get(&meta.table_ref());
    meta.columns
        .iter()
        .map(|c| {
            let p = profile.and_then(|p| p.column(&c.name));
            ColumnContext {
                name: c.name.clone(),
                data_type: c.canonical_type.as_str().to_string(),
                nullable: c.nullable,
                distinct_count: p.map_or(0, |p| p.distinct_count as u64),
                null_fraction: p.map_or(0.0, |p| p.null_fraction),
                sample_values: p.map(|p| p.sample_values.clone()).unwrap_or_default(),
                is_primary_key: pk.contains(&c.name),
                references: None,
                description: None,
            }
        })
        .collect()
}

/// One key-pruning request per table with a detected key and one
/// reference-pruning request per source column with accepted targets.
fn pruning_requests(state: &RunState, result: &DiscoveryResult, snapshot: &SchemaSnapshot) -> Vec<RequestPayload> {
    let mut out = Vec::new();
    for meta in &snapshot.tables {
        let tr = meta.table_ref();
        let detected: Vec<_> = result.pks.detected().filter(|c| c.table == tr).collect();
        if detected.is_empty() {
            continue;
        }
        let pk = result.pks.primary_key(&tr).map(|c| c.columns.clone()).unwrap_or_default();
        out.push(RequestPayload::PkPruning(PkPruningContext {
            table: tr,
            columns: column_contexts(meta, &state.profiles, &pk),
            candidates: detected
                .iter()
                .map(|c| PkOption {
                    columns: c.columns.clone(),
                    score: c.score,
                })
                .collect(),
        }));
    }
    let mut by_source: BTreeMap<String, Vec<FkOption>> = BTreeMap::new();
    for c in result.fks.accepted() {
        by_source.entry(c.source.to_string()).or_default().push(FkOption {
            target: c.target.to_string(),
            score: c.score,
            containment: c.factors.v,
        });
    }
    for (source, candidates) in by_source {
        out.push(RequestPayload::FkPruning(FkPruningContext { source, candidates }));
    }
    out
}

fn apply_pruning(result: &mut DiscoveryResult, request: &RequestPayload, response: ResponsePayload) -> PruningRecord {
    match (request, response) {
        (RequestPayload::PkPruning(ctx), ResponsePayload::PkPruning(p)) => {
            let mut dropped = Vec::new();
            for c in result.pks.candidates.iter_mut().filter(|c| c.table == ctx.table && c.is_detected()) {
                if !p.keep.contains(&c.columns) {
                    c.accepted = false;
                    dropped.push(c.columns.join("+"));
                }
            }
            PruningRecord {
                kind: RequestKind::PkPruning,
                subject: ctx.table.to_string(),
                kept: p.keep.iter().map(|k| k.join("+")).collect(),
                dropped,
                reasoning: p.reasoning,
            }
        }
        (RequestPayload::FkPruning(ctx), ResponsePayload::FkPruning(p)) => {
            let mut dropped = Vec::new();
            for c in result.fks.candidates.iter_mut().filter(|c| c.accepted && c.source.to_string() == ctx.source) {
                let target = c.target.to_string();
                if !p.keep.contains(&target) {
                    c.accepted = false;
                    dropped.push(target);
                }
            }
            PruningRecord {
                kind: RequestKind::FkPruning,
                subject: ctx.source.clone(),
                kept: p.keep,
                dropped,
                reasoning: p.reasoning,
            }
        }
        _ => unreachable!("validated response kind matches the request"),
    }
}

/// Output bundle files currently on disk under a run directory.
pub fn read_bundle(run_dir: &Path) -> Result<BTreeMap<String, String>, RunError> {
    let root = run_dir.join(OUTPUTS_DIR);
    let mut out = BTreeMap::new();
    let mut stack = vec![root.clone()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).map_err(io_err(&dir))? {
            let path = entry.map_err(io_err(&dir))?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(&root)
                    .expect("walked under root")
                    .to_string_lossy()
                    .replace('\\', "/");
                out.insert(rel, std::fs::read_to_string(&path).map_err(io_err(&path))?);
            }
        }
    }
    Ok(out)
}
