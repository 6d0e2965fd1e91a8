//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so the report is always printed.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::{Duration, Instant};

use darkdoc_core::analyzer::MockAnalyzer;
use darkdoc_core::discovery::fk::{
    compute_containment, fan_out_multiplier, score_fk_formula, FkScoreInputs, FkWeights, Gate,
};
use darkdoc_core::discovery::pk::{position_multiplier, score_pk_formula, PkScoreInputs};
use darkdoc_core::eval::{grade, overall_score};
use darkdoc_core::fixture::{self, Defect};
use darkdoc_core::ingest::Cell;
use darkdoc_core::model::{CanonicalType, ColumnRef, ObjectId, TableRef};
use darkdoc_core::run::{self, read_bundle, BudgetPhase, Phase, RunConfig, RunOptions, RunStatus, StopPoint};
use tempfile::TempDir;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("key score formulas match an independent oracle", formula_exactness),
        ("overall score of (0.942, 0.950, 0.99, 0.99) is 0.9612", overall_cross_check),
        ("gates keep every true reference and reject planted defects", gate_soundness),
        ("end-to-end mock run on lousy8", end_to_end),
        ("deterministic and resumable bundles", determinism_and_resume),
        ("insights climb one level per iteration", propagation_bound),
        ("ground-truth tables never change", immutability),
        ("token budget stops and resumes phase 3", guardrail_enforcement),
        ("adaptive weight redistribution", adaptive_redistribution),
        ("containment matches a full-scan oracle", containment_oracle),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {:>2}: PASS  {name} ({detail}; {secs:.2}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2}: FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

const TOLERANCE: f64 = 1e-9;

fn phi_oracle(pos: Option<usize>) -> f64 {
    match pos {
        None => 1.0,
        Some(0) => 1.0,
        Some(1) => 0.85,
        Some(2) => 0.70,
        Some(_) => 0.55,
    }
}

fn psi_oracle(n: usize) -> f64 {
    match n {
        0 | 1 => 1.0,
        2 => 0.85,
        3 => 0.75,
        _ => 0.65,
    }
}

fn pk_oracle(i: &PkScoreInputs) -> f64 {
    let mut s = 50.0 * i.f_u + 20.0 * i.n + 15.0 * i.d + 15.0 * i.p;
    if i.has_nulls {
        s *= 0.7;
    }
    if i.atypical_name {
        s *= 0.5;
    }
    s *= 1.0 - 0.6 * i.fk_likelihood;
    if i.surrogate {
        s += 20.0;
    }
    (s * phi_oracle(i.position)).clamp(0.0, 100.0)
}

fn fk_oracle(i: &FkScoreInputs) -> f64 {
    let (wv, ws, wr, wk, wn) = if i.adaptive {
        (55.0, 20.0, 15.0, 0.0, 10.0)
    } else {
        (40.0, 20.0, 15.0, 15.0, 10.0)
    };
    let r = if i.rho >= 2.0 { 1.0 } else { i.rho / 2.0 };
    let nu = if i.null_fraction < 0.3 {
        1.0
    } else if i.null_fraction <= 0.7 {
        0.5
    } else {
        0.0
    };
    let k = if i.k { 1.0 } else { 0.0 };
    let mut s = wv * i.v + ws * i.s + wr * r + wk * k + wn * nu;
    if i.orphan_rate > 0.2 {
        s *= 0.7;
    }
    if i.coercible_types {
        s *= 0.5;
    }
    s *= i.row_ratio_multiplier;
    (s * psi_oracle(i.fan_out)).clamp(0.0, 100.0)
}

fn formula_exactness() -> Check {
    let started = Instant::now();
    for (pos, want) in [(0, 1.0), (1, 0.85), (2, 0.70), (3, 0.55), (4, 0.55), (40, 0.55)] {
        ensure(position_multiplier(pos) == want, format!("phi({pos})"))?;
    }
    for (n, want) in [(1, 1.0), (2, 0.85), (3, 0.75), (4, 0.65), (9, 0.65)] {
        ensure(fan_out_multiplier(n) == want, format!("psi({n})"))?;
    }
    let mut count = 0usize;
    let mut worst = 0.0f64;
    let bools = [false, true];
    for f_u in [0.0, 0.3, 0.5, 0.95, 1.0] {
        for n in [0.0, 1.0] {
            for d in [0.3, 0.6, 1.0] {
                for p in [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0] {
                    for has_nulls in bools {
                        for atypical_name in bools {
                            for fk_likelihood in [0.0, 0.5, 1.0] {
                                for surrogate in bools {
                                    for position in [None, Some(0), Some(1), Some(2), Some(3), Some(7)] {
                                        let i = PkScoreInputs {
                                            f_u,
                                            n,
                                            d,
                                            p,
                                            has_nulls,
                                            atypical_name,
                                            fk_likelihood,
                                            surrogate,
                                            position,
                                        };
                                        let diff = (score_pk_formula(&i).score - pk_oracle(&i)).abs();
                                        worst = worst.max(diff);
                                        ensure(diff <= TOLERANCE, format!("pk {i:?}"))?;
                                        count += 1;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    for v in [0.0, 0.5, 0.75, 0.9, 1.0] {
        for s in [0.0, 0.8, 1.0] {
            for rho in [0.0, 0.5, 1.0, 2.0, 3.0] {
                for k in bools {
                    for null_fraction in [0.0, 0.29, 0.3, 0.7, 0.71] {
                        for adaptive in bools {
                            for orphan_rate in [0.0, 0.2, 0.21] {
                                for coercible_types in bools {
                                    for row_ratio_multiplier in [1.0, 0.75, 0.5] {
                                        for fan_out in [1, 2, 3, 4, 9] {
                                            let i = FkScoreInputs {
                                                v,
                                                s,
                                                rho,
                                                k,
                                                null_fraction,
                                                adaptive,
                                                orphan_rate,
                                                coercible_types,
                                                row_ratio_multiplier,
                                                fan_out,
                                            };
                                            let diff = (score_fk_formula(&i).score - fk_oracle(&i)).abs();
                                            worst = worst.max(diff);
                                            ensure(diff <= TOLERANCE, format!("fk {i:?}"))?;
                                            count += 1;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(1), format!("grid took {elapsed:?}"))?;
    Ok(format!("{count} combinations, max diff {worst:.1e}"))
}

fn overall_cross_check() -> Check {
    let s = overall_score(0.942, 0.950, 0.99, 0.99);
    ensure((s - 0.9612).abs() <= TOLERANCE, format!("got {s}"))?;
    ensure(grade(s) == "A+", "grade")?;
    Ok(format!("{s:.4}"))
}

fn gate_soundness() -> Check {
    let p = common::prepare("lousy8");
    let fks = &p.discovery.fks;
    let truth: BTreeSet<(ColumnRef, ColumnRef)> = p
        .fixture
        .truth
        .foreign_keys
        .iter()
        .map(|f| {
            (
                TableRef::parse(&f.source_table).column(f.source_column.clone()),
                TableRef::parse(&f.target_table).column(f.target_column.clone()),
            )
        })
        .collect();
    let mut true_seen = 0;
    for c in &fks.candidates {
        if truth.contains(&(c.source.clone(), c.target.clone())) {
            true_seen += 1;
            ensure(c.failed_gate().is_none(), format!("true {} -> {} failed a gate", c.source, c.target))?;
        }
    }
    ensure(true_seen == truth.len(), format!("{true_seen} of {} true references scored", truth.len()))?;

    let failed = |g: Gate, pick: &dyn Fn(&ColumnRef, &ColumnRef) -> bool| {
        fks.candidates
            .iter()
            .filter(|c| pick(&c.source, &c.target))
            .map(|c| (c.accepted, c.gates.iter().any(|o| o.gate == g && !o.passed)))
            .collect::<Vec<_>>()
    };
    ensure(p.fixture.spec.has(Defect::RowguidTarget), "rowguid defect planted")?;
    let rowguid = failed(Gate::G3, &|_, t| t.column == "rowguid");
    ensure(!rowguid.is_empty(), "no candidate targets rowguid")?;
    ensure(rowguid.iter().all(|&(acc, g)| !acc && g), "rowguid target not rejected by G3")?;

    let overlap = failed(Gate::G6, &|s, _| s.column == "old_rgn_id");
    ensure(!overlap.is_empty(), "no candidate for the 70% overlap column")?;
    ensure(overlap.iter().all(|&(acc, g)| !acc && g), "overlap column not rejected by G6")?;
    for c in fks.candidates.iter().filter(|c| c.source.column == "old_rgn_id") {
        ensure((c.factors.v - 0.7).abs() < TOLERANCE, format!("overlap v = {}", c.factors.v))?;
    }

    let pk_source = failed(Gate::G8, &|s, t| {
        s.table != t.table && p.discovery.pks.is_detected_single(&s.table, &s.column)
    });
    ensure(!pk_source.is_empty(), "no candidate from a key column")?;
    ensure(pk_source.iter().all(|&(acc, g)| !acc && g), "key source not rejected by G8")?;
    Ok(format!(
        "{true_seen} true kept; rejected {} rowguid, {} overlap, {} key-source",
        rowguid.len(),
        overlap.len(),
        pk_source.len()
    ))
}

fn fixture_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/fixtures")
}

fn setup(preset: &str) -> (TempDir, RunConfig) {
    let dir = TempDir::new().unwrap();
    let config = RunConfig {
        snapshot: fixture_dir().join(preset).join(fixture::MANIFEST_FILE),
        output_root: dir.path().join("runs"),
        ..Default::default()
    };
    (dir, config)
}

fn end_to_end() -> Check {
    let started = Instant::now();
    let fx = fixture::generate(&fixture::preset("lousy8").unwrap());
    for (name, text) in fx.files() {
        let frozen = std::fs::read_to_string(fixture_dir().join("lousy8").join(&name))
            .map_err(|e| format!("frozen {name}: {e}"))?;
        ensure(frozen == text, format!("generated {name} differs from the frozen copy"))?;
    }
    let (_dir, config) = setup("lousy8");
    let out = run::orchestrate(config, &MockAnalyzer, &RunOptions::default()).map_err(|e| e.to_string())?;
    ensure(out.status == RunStatus::Completed, format!("{:?}", out.status))?;
    let truth = darkdoc_core::ingest::load_truth(&fixture_dir().join("lousy8").join(fixture::TRUTH_FILE))
        .map_err(|e| e.to_string())?;
    let report = out.state.compare(&truth);
    let rs = out.state.refinement.as_ref().unwrap();
    ensure(report.pk.recall == 1.0, format!("PK recall {}", report.pk.recall))?;
    ensure(report.fk.f1 >= 0.90, format!("FK F1 {}", report.fk.f1))?;
    ensure(rs.converged && rs.iterations.len() <= 3, format!("{} iterations", rs.iterations.len()))?;
    let secs = started.elapsed().as_secs_f64();
    ensure(secs < 30.0, format!("took {secs:.1}s"))?;
    Ok(format!(
        "PK recall {:.2}, FK F1 {:.3}, converged in {}",
        report.pk.recall,
        report.fk.f1,
        rs.iterations.len()
    ))
}

fn determinism_and_resume() -> Check {
    let (_dir, config) = setup("lousy8");
    let go = |opts: &RunOptions| run::orchestrate(config.clone(), &MockAnalyzer, opts).unwrap();
    let a = read_bundle(&go(&RunOptions::default()).run_dir).unwrap();
    let b = read_bundle(&go(&RunOptions::default()).run_dir).unwrap();
    ensure(a == b, "two uninterrupted runs differ")?;
    let mut stops: Vec<StopPoint> = Phase::ALL[..4].iter().map(|p| StopPoint::AfterPhase(*p)).collect();
    stops.push(StopPoint::AfterLevel { iteration: 1, level: 0 });
    stops.push(StopPoint::AfterLevel { iteration: 2, level: 1 });
    for stop in &stops {
        let stopped = go(&RunOptions {
            stop: Some(*stop),
            ..Default::default()
        });
        ensure(stopped.status == RunStatus::Stopped, format!("{stop:?} did not stop"))?;
        let resumed = run::resume(&stopped.state_path, None, &MockAnalyzer, &RunOptions::default()).unwrap();
        ensure(read_bundle(&resumed.run_dir).unwrap() == a, format!("resume after {stop:?} differs"))?;
    }
    Ok(format!("{} files, {} stop points", a.len(), stops.len()))
}

fn propagation_bound() -> Check {
    let p = common::prepare("chain4");
    let (s, _) = p.refine(5, &BTreeMap::new());
    ensure(s.graph.levels.len() == 4, "chain has four levels")?;
    let note = "tax jurisdiction from order line";
    let first = |table: &TableRef| {
        s.store
            .get(&ObjectId::Table(table.clone()))
            .and_then(|r| r.history.iter().find(|h| h.text.contains(note)).map(|h| h.iteration))
    };
    let trace: Vec<Option<usize>> = s.graph.levels[..3].iter().rev().map(|l| first(&l[0])).collect();
    ensure(trace == [Some(1), Some(2), Some(3)], format!("trace {trace:?}"))?;
    Ok("levels 2, 1, 0 at iterations 1, 2, 3".into())
}

fn immutability() -> Check {
    let (_dir, mut config) = setup("lousy8");
    let pinned = [
        ("dbo.rgn", "Geographic sales regions with a tax rate."),
        ("dbo.cst", "Customers who place orders; 'legacy' ids come from the old CRM."),
        ("dbo.inv_ln", "Invoice lines; one row per product sold."),
    ];
    for (t, text) in pinned {
        config.ground_truth.insert(ObjectId::Table(TableRef::parse(t)), text.into());
    }
    config.convergence.max_iterations = 3;
    // Mock confidence is 0.9, so the run cannot converge before the cap.
    config.convergence.confidence_threshold = 1.0;
    let out = run::orchestrate(config, &MockAnalyzer, &RunOptions::default()).map_err(|e| e.to_string())?;
    let rs = out.state.refinement.as_ref().unwrap();
    ensure(rs.iterations.len() == 3, format!("{} iterations", rs.iterations.len()))?;
    let tables_csv = &read_bundle(&out.run_dir).unwrap()["csv/tables.csv"];
    for (t, text) in pinned {
        let rec = rs.store.get(&ObjectId::Table(TableRef::parse(t))).unwrap();
        ensure(rec.text == text, format!("{t} changed to {:?}", rec.text))?;
        ensure(rec.history.iter().all(|h| h.text == text), format!("{t} history changed"))?;
        ensure(tables_csv.contains(text), format!("{t} text missing from tables.csv"))?;
    }
    Ok("3 tables byte-identical over 3 iterations".into())
}

fn guardrail_enforcement() -> Check {
    let (_dir, config) = setup("lousy8");
    let reference = run::orchestrate(config.clone(), &MockAnalyzer, &RunOptions::default()).unwrap();
    let analysis = reference.state.usage.phase(BudgetPhase::Analysis).total();
    let discovery = reference.state.usage.phase(BudgetPhase::Discovery).total();
    let reserve = config.guardrails.output_reserve_tokens;
    let max = ((analysis as f64 * 0.5 / 0.7) as u64).max((discovery + reserve) * 4 * 11 / 10);
    let mut limited = config.clone();
    limited.guardrails.max_tokens_per_run = Some(max);
    let halted = run::orchestrate(limited, &MockAnalyzer, &RunOptions::default()).unwrap();
    let RunStatus::Halted(breach) = &halted.status else {
        return Err(format!("no halt: {:?}", halted.status));
    };
    ensure(breach.phase == Phase::Refinement, format!("halted in {:?}", breach.phase))?;
    let saved = run::RunState::load(&halted.state_path).map_err(|e| e.to_string())?;
    ensure(saved.breach.is_some(), "breach not persisted")?;
    let cap = 0.7 * max as f64;
    let spent = saved.usage.phase(BudgetPhase::Analysis).total() + saved.discarded_usage.total();
    ensure(spent as f64 <= cap, format!("{spent} tokens issued against a cap of {cap:.0}"))?;
    let mut raised = config.clone();
    raised.guardrails.max_tokens_per_run = Some(max * 10);
    let resumed = run::resume(&halted.state_path, Some(raised), &MockAnalyzer, &RunOptions::default()).unwrap();
    ensure(resumed.status == RunStatus::Completed, format!("{:?}", resumed.status))?;
    ensure(
        read_bundle(&resumed.run_dir).unwrap() == read_bundle(&reference.run_dir).unwrap(),
        "resumed bundle differs from the unconstrained run",
    )?;
    Ok(format!("halted at {spent} of {cap:.0} analysis tokens, resumed identically"))
}

fn adaptive_redistribution() -> Check {
    let nopk = common::prepare("nopk");
    let f = &nopk.discovery.fks;
    ensure(f.zero_k_fraction > 0.4, format!("zero-key fraction {}", f.zero_k_fraction))?;
    ensure(f.adaptive && f.weights == FkWeights::ADAPTIVE, "nopk weights not redistributed")?;
    let w = f.weights;
    ensure([w.v, w.s, w.r, w.k, w.nu] == [55.0, 20.0, 15.0, 0.0, 10.0], format!("{w:?}"))?;
    ensure(w.total() == 100.0, "adaptive total")?;
    let std = common::prepare("lousy8").discovery.fks;
    let w = std.weights;
    ensure(!std.adaptive && [w.v, w.s, w.r, w.k, w.nu] == [40.0, 20.0, 15.0, 15.0, 10.0], format!("{w:?}"))?;
    ensure(w.total() == 100.0, "standard total")?;
    Ok(format!("nopk zero-key fraction {:.2}", f.zero_k_fraction))
}

/// Comparison form used by the oracle: integers by value, UUID-shaped
/// text lowercased, anything else trimmed.
fn oracle_form(ty: CanonicalType, v: &str) -> String {
    let t = v.trim();
    let textual = matches!(ty, CanonicalType::Varchar | CanonicalType::Text);
    let integral = matches!(ty, CanonicalType::Int | CanonicalType::Bigint | CanonicalType::Smallint);
    if integral || textual {
        if let Ok(i) = t.parse::<i64>() {
            return i.to_string();
        }
    }
    let uuid_shaped = t.len() == 36
        && t.char_indices()
            .all(|(i, c)| if [8, 13, 18, 23].contains(&i) { c == '-' } else { c.is_ascii_hexdigit() });
    if ty == CanonicalType::Uuid || (textual && uuid_shaped) {
        return t.to_ascii_lowercase();
    }
    t.to_string()
}

fn containment_oracle() -> Check {
    let p = common::prepare("lousy8");
    let input = p.snapshot.discovery_input();
    for prof in p.profiles.values() {
        ensure(prof.row_count <= 500, format!("{} has {} rows", prof.table, prof.row_count))?;
        ensure(prof.is_full_scan(), format!("{} not fully sampled", prof.table))?;
    }
    let columns: Vec<(ColumnRef, CanonicalType, &[Cell])> = p
        .snapshot
        .tables
        .iter()
        .flat_map(|t| {
            let tr = t.table_ref();
            let input = &input;
            t.columns.iter().map(move |c| {
                (
                    tr.column(c.name.clone()),
                    c.canonical_type,
                    input.column_values(&tr, &c.name).unwrap(),
                )
            })
        })
        .collect();
    let mut pairs = 0;
    for (src, sty, svals) in &columns {
        let distinct: BTreeSet<String> = svals.iter().flatten().map(|v| oracle_form(*sty, v)).collect();
        for (tgt, tty, tvals) in &columns {
            if src == tgt {
                continue;
            }
            let target: BTreeSet<String> = tvals.iter().flatten().map(|v| oracle_form(*tty, v)).collect();
            let expected = if distinct.is_empty() {
                None
            } else {
                let hits = distinct.intersection(&target).count();
                Some(hits as f64 / distinct.len() as f64)
            };
            let got = compute_containment(&input, &p.profiles, src, tgt);
            ensure(got == expected, format!("{src} in {tgt}: {got:?} vs {expected:?}"))?;
            pairs += 1;
        }
    }
    Ok(format!("{pairs} column pairs exact"))
}
