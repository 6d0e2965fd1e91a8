//! Deterministic rule-based analyzer for offline runs and tests.
//!
//! Responses are pure functions of the request. Token usage is the request
//! and response character counts divided by four.

use std::collections::BTreeSet;

use super::{
    char_tokens, encode_response, AnalysisRequest, AnalysisResponse, Analyzer, ChangeClass,
    ColumnContext, ColumnDescription, FkPruning, FkSuggestion, ParentInsight, PkPruning,
    RequestPayload, ResponsePayload, Revision, RevisionContext, SanityContext, SanityIssue,
    SanityReport, SemanticVerdict, TableAnalysis, TableContext, TokenUsage,
};
use crate::discovery::names::normalize;
use crate::error::AnalyzerError;
use crate::lexicon::phrase;
use crate::model::TableRef;

/// Separator in front of every insight appended to a description.
pub const NOTE_MARKER: &str = "; noted: ";

const MAX_THEMES: usize = 4;
const MATERIAL_BELOW: f64 = 0.8;

#[derive(Debug, Clone, Default)]
pub struct MockAnalyzer;

impl MockAnalyzer {
    pub fn new() -> Self {
        Self
    }
}

impl Analyzer for MockAnalyzer {
    fn model(&self) -> &str {
        "mock"
    }

    fn complete(&self, request: &AnalysisRequest) -> Result<AnalysisResponse, AnalyzerError> {
        let payload = respond(&request.payload);
        let usage = TokenUsage {
            input: request.estimated_input_tokens(),
            output: char_tokens(&encode_response(&payload)),
        };
        Ok(AnalysisResponse { payload, usage })
    }
}

fn respond(payload: &RequestPayload) -> ResponsePayload {
    match payload {
        RequestPayload::TableAnalysis(ctx) => ResponsePayload::TableAnalysis(analyze_table(ctx)),
        RequestPayload::Revision(ctx) => ResponsePayload::Revision(revise(ctx)),
        RequestPayload::SanityLevel(ctx)
        | RequestPayload::SanitySchema(ctx)
        | RequestPayload::SanityCross(ctx) => ResponsePayload::Sanity(sanity(ctx)),
        RequestPayload::SemanticComparison(ctx) => {
            let j = jaccard(&token_set(&ctx.old_description), &token_set(&ctx.new_description));
            ResponsePayload::SemanticComparison(SemanticVerdict {
                classification: if j < MATERIAL_BELOW {
                    ChangeClass::Material
                } else {
                    ChangeClass::Cosmetic
                },
                reasoning: format!("token overlap {j:.3}"),
            })
        }
        RequestPayload::PkPruning(ctx) => ResponsePayload::PkPruning(PkPruning {
            keep: ctx.candidates.iter().map(|c| c.columns.clone()).collect(),
            reasoning: "all candidates consistent with column names".into(),
        }),
        RequestPayload::FkPruning(ctx) => ResponsePayload::FkPruning(FkPruning {
            keep: ctx.candidates.iter().map(|c| c.target.clone()).collect(),
            reasoning: "all candidates consistent with column names".into(),
        }),
    }
}

/// Lowercase alphanumeric words.
pub fn token_set(s: &str) -> BTreeSet<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Intersection over union; two empty sets are identical.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

fn display(t: &TableRef) -> String {
    phrase(&t.table)
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn words_of(s: &str) -> String {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Insight clauses carried by a description.
fn notes(description: &str) -> Vec<String> {
    description
        .split(NOTE_MARKER)
        .skip(1)
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn is_theme(c: &ColumnContext) -> bool {
    !c.is_primary_key && c.references.is_none()
}

fn themes(ctx: &TableContext) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for c in ctx.columns.iter().filter(|c| is_theme(c)) {
        let p = phrase(&c.name);
        if !out.contains(&p) {
            out.push(p);
        }
    }
    out.truncate(MAX_THEMES);
    out
}

fn column_description(c: &ColumnContext) -> String {
    let mut s = format!(
        "{}; {}, {} distinct values, {:.0}% null",
        capitalize(&phrase(&c.name)),
        c.data_type,
        c.distinct_count,
        c.null_fraction * 100.0
    );
    if c.is_primary_key {
        s.push_str(", primary key");
    }
    if let Some(r) = &c.references {
        s.push_str(&format!(", references {r}"));
    }
    s
}

fn analyze_table(ctx: &TableContext) -> TableAnalysis {
    let name = display(&ctx.table);
    let themes = themes(ctx);
    let mut description = if themes.is_empty() {
        format!("{} stores key references", capitalize(&name))
    } else {
        format!("{} stores {}", capitalize(&name), themes.join(", "))
    };
    let parents: Vec<&TableRef> = ctx
        .parents
        .iter()
        .map(|p| &p.table)
        .filter(|t| **t != ctx.table)
        .collect();
    if !parents.is_empty() {
        let names: Vec<String> = parents.iter().map(|t| display(t)).collect();
        description.push_str(&format!("; references {}", names.join(", ")));
    }
    let inherited = ctx.prior_description.as_deref().map(notes).unwrap_or_default();
    for n in &inherited {
        description.push_str(NOTE_MARKER);
        description.push_str(n);
    }

    let has_samples = |c: &ColumnContext| !c.sample_values.is_empty();
    let confidence = if ctx.row_count > 0 && ctx.columns.iter().any(has_samples) {
        0.9
    } else {
        0.5
    };
    let columns = ctx
        .columns
        .iter()
        .map(|c| ColumnDescription {
            name: c.name.clone(),
            description: column_description(c),
            confidence: if has_samples(c) { 0.9 } else { 0.5 },
        })
        .collect();

    let mut foreign_keys = Vec::new();
    for c in ctx.columns.iter().filter(|c| is_theme(c)) {
        let col = normalize(&c.name);
        for other in ctx.known_tables.iter().filter(|t| **t != ctx.table) {
            if col == format!("{}id", normalize(&other.table)) {
                foreign_keys.push(FkSuggestion {
                    source_column: c.name.clone(),
                    target_table: other.to_string(),
                    target_column: c.name.clone(),
                });
            }
        }
    }

    let own = format!(
        "{} from {}",
        themes.first().cloned().unwrap_or_else(|| format!("{name} rows")),
        name
    );
    let mut parent_insights = Vec::new();
    for p in &parents {
        for text in std::iter::once(&own).chain(inherited.iter()) {
            parent_insights.push(ParentInsight {
                parent_table: p.to_string(),
                insight: text.clone(),
                confidence: 0.8,
            });
        }
    }

    TableAnalysis {
        table_description: description,
        confidence,
        reasoning: format!(
            "derived from {} column names and {} carried insight(s)",
            ctx.columns.len(),
            inherited.len()
        ),
        columns,
        foreign_keys,
        parent_insights,
    }
}

fn revise(ctx: &RevisionContext) -> Revision {
    let mut current = ctx.current_description.clone();
    let mut added = 0;
    for i in &ctx.insights {
        if !words_of(&current).contains(&words_of(&i.text)) {
            current.push_str(NOTE_MARKER);
            current.push_str(i.text.trim());
            added += 1;
        }
    }
    if added == 0 {
        Revision {
            needs_revision: false,
            revised_description: None,
            reasoning: "every insight is already reflected".into(),
            confidence: ctx.current_confidence,
        }
    } else {
        Revision {
            needs_revision: true,
            revised_description: Some(current),
            reasoning: format!("added {added} insight(s) from child tables"),
            confidence: ctx.current_confidence,
        }
    }
}

fn sanity(ctx: &SanityContext) -> SanityReport {
    let mut issues = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for t in &ctx.tables {
        let text = words_of(&t.description);
        for p in t.parents.iter().filter(|p| **p != t.table) {
            let name = words_of(&display(p));
            if !text.contains(&name) {
                issues.push(SanityIssue {
                    table: t.table.to_string(),
                    message: format!("description does not mention referenced entity `{name}`"),
                });
            }
        }
        if !text.is_empty() && !seen.insert(text) {
            issues.push(SanityIssue {
                table: t.table.to_string(),
                message: "description duplicates another table's description".into(),
            });
        }
    }
    SanityReport { issues }
}
