use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analyzer::{RequestKind, TokenUsage};

/// Budget partition a call is charged to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BudgetPhase {
    Discovery,
    Analysis,
    Sanity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct PhaseShares {
    pub discovery: f64,
    pub analysis: f64,
    pub sanity: f64,
}

impl Default for PhaseShares {
    fn default() -> Self {
        Self {
            discovery: 0.25,
            analysis: 0.70,
            sanity: 0.05,
        }
    }
}

impl PhaseShares {
    pub fn share(&self, phase: BudgetPhase) -> f64 {
        match phase {
            BudgetPhase::Discovery => self.discovery,
            BudgetPhase::Analysis => self.analysis,
            BudgetPhase::Sanity => self.sanity,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct Prices {
    pub input_per_million: f64,
    pub output_per_million: f64,
}

impl Prices {
    pub fn cost(&self, usage: TokenUsage) -> f64 {
        (usage.input as f64 * self.input_per_million + usage.output as f64 * self.output_per_million) / 1e6
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct Guardrails {
    pub max_tokens_per_run: Option<u64>,
    pub max_duration_seconds: Option<f64>,
    pub max_cost_dollars: Option<f64>,
    pub phase_shares: PhaseShares,
    pub warn_threshold: f64,
    pub prices: Prices,
    /// Output tokens assumed for a call when projecting its cost.
    pub output_reserve_tokens: u64,
}

impl Default for Guardrails {
    fn default() -> Self {
        Self {
            max_tokens_per_run: None,
            max_duration_seconds: None,
            max_cost_dollars: None,
            phase_shares: PhaseShares::default(),
            warn_threshold: 0.8,
            prices: Prices::default(),
            output_reserve_tokens: 256,
        }
    }
}

impl Guardrails {
    pub fn validate(&self) -> Result<(), String> {
        let s = self.phase_shares;
        if [s.discovery, s.analysis, s.sanity].iter().any(|x| *x < 0.0)
            || ((s.discovery + s.analysis + s.sanity) - 1.0).abs() > 1e-9
        {
            return Err("guardrail phase shares must be non-negative and sum to 1".into());
        }
        if !(self.warn_threshold > 0.0 && self.warn_threshold <= 1.0) {
            return Err("warn threshold must be in (0, 1]".into());
        }
        Ok(())
    }
}

/// Token counters per budget phase and per request kind.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Usage {
    pub by_phase: BTreeMap<BudgetPhase, TokenUsage>,
    pub by_kind: BTreeMap<RequestKind, TokenUsage>,
    pub calls: BTreeMap<RequestKind, u64>,
}

impl Usage {
    pub fn record(&mut self, phase: BudgetPhase, kind: RequestKind, usage: TokenUsage) {
        self.by_phase.entry(phase).or_default().add(usage);
        self.by_kind.entry(kind).or_default().add(usage);
        *self.calls.entry(kind).or_default() += 1;
    }

    pub fn merge(&mut self, other: &Usage) {
        for (p, u) in &other.by_phase {
            self.by_phase.entry(*p).or_default().add(*u);
        }
        for (k, u) in &other.by_kind {
            self.by_kind.entry(*k).or_default().add(*u);
        }
        for (k, n) in &other.calls {
            *self.calls.entry(*k).or_default() += n;
        }
    }

    pub fn phase(&self, phase: BudgetPhase) -> TokenUsage {
        self.by_phase.get(&phase).copied().unwrap_or_default()
    }

    pub fn total(&self) -> TokenUsage {
        let mut t = TokenUsage::default();
        for u in self.by_phase.values() {
            t.add(*u);
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Precheck {
    Allow,
    /// Past the warning threshold: optional calls are skipped.
    Warn,
    Deny(String),
}

/// Decides whether a call with `input_estimate` prompt tokens may be issued,
/// given what has been used so far.
pub fn precheck_budget(
    g: &Guardrails,
    used: &Usage,
    phase: BudgetPhase,
    input_estimate: u64,
    elapsed_seconds: f64,
) -> Precheck {
    let projected_call = TokenUsage {
        input: input_estimate,
        output: g.output_reserve_tokens,
    };
    let mut warn = false;
    if let Some(limit) = g.max_duration_seconds {
        if elapsed_seconds >= limit {
            return Precheck::Deny(format!("run duration {elapsed_seconds:.1}s reached the {limit}s limit"));
        }
        warn |= elapsed_seconds >= g.warn_threshold * limit;
    }
    if let Some(max) = g.max_tokens_per_run {
        let cap = g.phase_shares.share(phase) * max as f64;
        let phase_used = used.phase(phase).total();
        let run_used = used.total().total();
        let next = projected_call.total();
        if (phase_used + next) as f64 > cap {
            return Precheck::Deny(format!(
                "{phase:?} budget: {phase_used} used + {next} projected exceeds {cap:.0}"
            ));
        }
        if run_used + next > max {
            return Precheck::Deny(format!("run budget: {run_used} used + {next} projected exceeds {max}"));
        }
        warn |= phase_used as f64 >= g.warn_threshold * cap || run_used as f64 >= g.warn_threshold * max as f64;
    }
    if let Some(max) = g.max_cost_dollars {
        let spent = g.prices.cost(used.total());
        let next = g.prices.cost(projected_call);
        if spent + next > max {
            return Precheck::Deny(format!("cost: ${spent:.4} spent + ${next:.4} projected exceeds ${max}"));
        }
        warn |= spent >= g.warn_threshold * max;
    }
    if warn {
        Precheck::Warn
    } else {
        Precheck::Allow
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn used(phase: BudgetPhase, tokens: u64) -> Usage {
        let mut u = Usage::default();
        u.record(phase, RequestKind::TableAnalysis, TokenUsage { input: tokens, output: 0 });
        u
    }

    fn guard(max: u64) -> Guardrails {
        Guardrails {
            max_tokens_per_run: Some(max),
            output_reserve_tokens: 0,
            ..Default::default()
        }
    }

    #[test]
    fn warning_starts_at_eighty_percent_of_the_phase() {
        let g = guard(10_000);
        let a = BudgetPhase::Analysis;
        assert_eq!(precheck_budget(&g, &used(a, 5_530), a, 10, 0.0), Precheck::Allow);
        assert_eq!(precheck_budget(&g, &used(a, 5_670), a, 10, 0.0), Precheck::Warn);
    }

    #[test]
    fn projected_overrun_is_denied() {
        let g = guard(10_000);
        let a = BudgetPhase::Analysis;
        assert!(matches!(precheck_budget(&g, &used(a, 6_900), a, 101, 0.0), Precheck::Deny(_)));
        assert!(matches!(precheck_budget(&g, &used(a, 6_900), a, 100, 0.0), Precheck::Warn));
        let s = BudgetPhase::Sanity;
        assert!(matches!(precheck_budget(&g, &Usage::default(), s, 501, 0.0), Precheck::Deny(_)));
    }

    #[test]
    fn output_reserve_counts_toward_projection() {
        let g = Guardrails {
            output_reserve_tokens: 200,
            ..guard(1_000)
        };
        let d = BudgetPhase::Discovery;
        assert!(matches!(precheck_budget(&g, &Usage::default(), d, 51, 0.0), Precheck::Deny(_)));
        assert_eq!(precheck_budget(&g, &Usage::default(), d, 50, 0.0), Precheck::Allow);
    }

    #[test]
    fn cost_and_duration_limits() {
        let g = Guardrails {
            max_cost_dollars: Some(1.0),
            prices: Prices {
                input_per_million: 1_000_000.0,
                output_per_million: 0.0,
            },
            output_reserve_tokens: 0,
            ..Default::default()
        };
        let a = BudgetPhase::Analysis;
        assert!(matches!(precheck_budget(&g, &Usage::default(), a, 2, 0.0), Precheck::Deny(_)));
        assert_eq!(precheck_budget(&g, &Usage::default(), a, 1, 0.0), Precheck::Allow);
        let t = Guardrails {
            max_duration_seconds: Some(10.0),
            ..Default::default()
        };
        assert_eq!(precheck_budget(&t, &Usage::default(), a, 1, 8.5), Precheck::Warn);
        assert!(matches!(precheck_budget(&t, &Usage::default(), a, 1, 10.0), Precheck::Deny(_)));
    }

    #[test]
    fn unlimited_by_default() {
        let g = Guardrails::default();
        assert_eq!(precheck_budget(&g, &used(BudgetPhase::Analysis, u64::MAX / 4), BudgetPhase::Analysis, 1, 1e9), Precheck::Allow);
    }
}
