//! Semantic analyzer interface, request/response types and validation.
//!
//! Every analyzer call goes through [`analyze`], which validates the typed
//! response against the request before anything downstream sees it.

mod http;
mod mock;
pub mod templates;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::AnalyzerError;
use crate::model::TableRef;

pub use http::{decode_envelope, strip_fences, HttpAnalyzer, HttpConfig};
pub use mock::{jaccard, token_set, MockAnalyzer, NOTE_MARKER};

/// Sampling temperature for every request.
pub const TEMPERATURE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RequestKind {
    TableAnalysis,
    Revision,
    SanityLevel,
    SanitySchema,
    SanityCross,
    SemanticComparison,
    PkPruning,
    FkPruning,
}

impl RequestKind {
    pub const ALL: [RequestKind; 8] = [
        RequestKind::TableAnalysis,
        RequestKind::Revision,
        RequestKind::SanityLevel,
        RequestKind::SanitySchema,
        RequestKind::SanityCross,
        RequestKind::SemanticComparison,
        RequestKind::PkPruning,
        RequestKind::FkPruning,
    ];

    /// Name of the prompt template for this kind.
    pub fn template(self) -> &'static str {
        match self {
            RequestKind::TableAnalysis => "table-analysis",
            RequestKind::Revision => "backpropagation",
            RequestKind::SanityLevel => "dep-level-sanity",
            RequestKind::SanitySchema => "schema-sanity",
            RequestKind::SanityCross => "cross-schema-sanity",
            RequestKind::SemanticComparison => "semantic-comparison",
            RequestKind::PkPruning => "pk-pruning",
            RequestKind::FkPruning => "fk-pruning",
        }
    }
}

impl fmt::Display for RequestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("enum serializes");
        f.write_str(s.as_str().unwrap_or_default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Effort {
    Low,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ColumnContext {
    pub name: String,
    pub data_type: String,
    pub nullable: bool,
    pub distinct_count: u64,
    pub null_fraction: f64,
    pub sample_values: Vec<String>,
    pub is_primary_key: bool,
    /// `schema.table.column` this column references, if any.
    pub references: Option<String>,
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NeighborDescription {
    pub table: TableRef,
    pub description: String,
    pub ground_truth: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TableContext {
    pub table: TableRef,
    pub row_count: u64,
    pub iteration: usize,
    pub columns: Vec<ColumnContext>,
    pub parents: Vec<NeighborDescription>,
    /// Ground-truth descriptions of direct children.
    pub ground_truth_neighbors: Vec<NeighborDescription>,
    /// Every table name in the schema (names only, no descriptions).
    pub known_tables: Vec<TableRef>,
    pub prior_description: Option<String>,
    pub prior_reasoning: Option<String>,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Insight {
    pub from_table: TableRef,
    pub about_parent: TableRef,
    pub text: String,
    pub confidence: f64,
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RevisionContext {
    pub table: TableRef,
    pub current_description: String,
    pub current_confidence: f64,
    pub insights: Vec<Insight>,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SanityTable {
    pub table: TableRef,
    pub description: String,
    pub parents: Vec<TableRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SanityContext {
    /// Level number, schema name or `*` for the whole catalog.
    pub scope: String,
    pub tables: Vec<SanityTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ComparisonContext {
    pub object: String,
    pub old_description: String,
    pub new_description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PkOption {
    pub columns: Vec<String>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PkPruningContext {
    pub table: TableRef,
    pub columns: Vec<ColumnContext>,
    pub candidates: Vec<PkOption>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FkOption {
    /// `schema.table.column`.
    pub target: String,
    pub score: f64,
    pub containment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FkPruningContext {
    /// `schema.table.column`.
    pub source: String,
    pub candidates: Vec<FkOption>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "context", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RequestPayload {
    TableAnalysis(TableContext),
    Revision(RevisionContext),
    SanityLevel(SanityContext),
    SanitySchema(SanityContext),
    SanityCross(SanityContext),
    SemanticComparison(ComparisonContext),
    PkPruning(PkPruningContext),
    FkPruning(FkPruningContext),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnalysisRequest {
    pub seed_context: String,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effort: Option<Effort>,
    pub payload: RequestPayload,
}

impl AnalysisRequest {
    pub fn new(seed_context: &str, payload: RequestPayload) -> Self {
        let effort = matches!(
            payload,
            RequestPayload::SanityLevel(_)
                | RequestPayload::SanitySchema(_)
                | RequestPayload::SanityCross(_)
        )
        .then_some(Effort::High);
        Self {
            seed_context: seed_context.to_string(),
            temperature: TEMPERATURE,
            effort,
            payload,
        }
    }

    pub fn kind(&self) -> RequestKind {
        match &self.payload {
            RequestPayload::TableAnalysis(_) => RequestKind::TableAnalysis,
            RequestPayload::Revision(_) => RequestKind::Revision,
            RequestPayload::SanityLevel(_) => RequestKind::SanityLevel,
            RequestPayload::SanitySchema(_) => RequestKind::SanitySchema,
            RequestPayload::SanityCross(_) => RequestKind::SanityCross,
            RequestPayload::SemanticComparison(_) => RequestKind::SemanticComparison,
            RequestPayload::PkPruning(_) => RequestKind::PkPruning,
            RequestPayload::FkPruning(_) => RequestKind::FkPruning,
        }
    }

    /// Compact JSON of the whole request; the unit of token estimation.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("requests serialize")
    }

    /// Characters of [`Self::canonical_json`] divided by four, rounded up.
    pub fn estimated_input_tokens(&self) -> u64 {
        char_tokens(&self.canonical_json())
    }
}

pub fn char_tokens(s: &str) -> u64 {
    (s.chars().count() as u64).div_ceil(4)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ColumnDescription {
    pub name: String,
    pub description: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FkSuggestion {
    pub source_column: String,
    /// `schema.table`.
    pub target_table: String,
    pub target_column: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ParentInsight {
    /// `schema.table`.
    pub parent_table: String,
    pub insight: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TableAnalysis {
    pub table_description: String,
    pub confidence: f64,
    pub reasoning: String,
    pub columns: Vec<ColumnDescription>,
    pub foreign_keys: Vec<FkSuggestion>,
    pub parent_insights: Vec<ParentInsight>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Revision {
    pub needs_revision: bool,
    pub revised_description: Option<String>,
    pub reasoning: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SanityIssue {
    /// `schema.table`.
    pub table: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SanityReport {
    pub issues: Vec<SanityIssue>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeClass {
    Material,
    Cosmetic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SemanticVerdict {
    pub classification: ChangeClass,
    pub reasoning: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PkPruning {
    /// Column lists of the candidates to keep.
    pub keep: Vec<Vec<String>>,
    pub reasoning: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FkPruning {
    /// `schema.table.column` of the targets to keep.
    pub keep: Vec<String>,
    pub reasoning: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "body", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ResponsePayload {
    TableAnalysis(TableAnalysis),
    Revision(Revision),
    Sanity(SanityReport),
    SemanticComparison(SemanticVerdict),
    PkPruning(PkPruning),
    FkPruning(FkPruning),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TokenUsage {
    pub input: u64,
    pub output: u64,
}

impl TokenUsage {
    pub fn total(&self) -> u64 {
        self.input + self.output
    }

    pub fn add(&mut self, other: TokenUsage) {
        self.input += other.input;
        self.output += other.output;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResponse {
    pub payload: ResponsePayload,
    pub usage: TokenUsage,
}

pub trait Analyzer: Send + Sync {
    /// Model identifier recorded in run state.
    fn model(&self) -> &str;

    fn complete(&self, request: &AnalysisRequest) -> Result<AnalysisResponse, AnalyzerError>;
}

/// Issues a request and validates the response against it.
pub fn analyze(
    analyzer: &dyn Analyzer,
    request: &AnalysisRequest,
) -> Result<AnalysisResponse, AnalyzerError> {
    let response = analyzer.complete(request)?;
    validate_response(request, &response.payload)?;
    Ok(response)
}

/// Decodes the JSON body an analyzer produced for `kind`.
pub fn decode_response(kind: RequestKind, text: &str) -> Result<ResponsePayload, AnalyzerError> {
    let bad = |e: serde_json::Error| AnalyzerError::InvalidResponse(e.to_string());
    Ok(match kind {
        RequestKind::TableAnalysis => ResponsePayload::TableAnalysis(serde_json::from_str(text).map_err(bad)?),
        RequestKind::Revision => ResponsePayload::Revision(serde_json::from_str(text).map_err(bad)?),
        RequestKind::SanityLevel | RequestKind::SanitySchema | RequestKind::SanityCross => {
            ResponsePayload::Sanity(serde_json::from_str(text).map_err(bad)?)
        }
        RequestKind::SemanticComparison => {
            ResponsePayload::SemanticComparison(serde_json::from_str(text).map_err(bad)?)
        }
        RequestKind::PkPruning => ResponsePayload::PkPruning(serde_json::from_str(text).map_err(bad)?),
        RequestKind::FkPruning => ResponsePayload::FkPruning(serde_json::from_str(text).map_err(bad)?),
    })
}

/// JSON body of a payload as the analyzer would return it.
pub fn encode_response(payload: &ResponsePayload) -> String {
    let v = match payload {
        ResponsePayload::TableAnalysis(b) => serde_json::to_string(b),
        ResponsePayload::Revision(b) => serde_json::to_string(b),
        ResponsePayload::Sanity(b) => serde_json::to_string(b),
        ResponsePayload::SemanticComparison(b) => serde_json::to_string(b),
        ResponsePayload::PkPruning(b) => serde_json::to_string(b),
        ResponsePayload::FkPruning(b) => serde_json::to_string(b),
    };
    v.expect("responses serialize")
}

fn invalid(msg: impl Into<String>) -> AnalyzerError {
    AnalyzerError::InvalidResponse(msg.into())
}

fn check_confidence(what: &str, c: f64) -> Result<(), AnalyzerError> {
    if c.is_finite() && (0.0..=1.0).contains(&c) {
        Ok(())
    } else {
        Err(invalid(format!("{what} confidence {c} outside [0, 1]")))
    }
}

fn check_text(what: &str, s: &str) -> Result<(), AnalyzerError> {
    if s.trim().is_empty() {
        Err(invalid(format!("{what} is empty")))
    } else {
        Ok(())
    }
}

/// Checks that a response has the shape the request asked for and only
/// refers to objects the request mentioned.
pub fn validate_response(
    request: &AnalysisRequest,
    payload: &ResponsePayload,
) -> Result<(), AnalyzerError> {
    match (&request.payload, payload) {
        (RequestPayload::TableAnalysis(ctx), ResponsePayload::TableAnalysis(r)) => {
            check_text("table description", &r.table_description)?;
            check_confidence("table", r.confidence)?;
            let names: BTreeSet<&str> = ctx.columns.iter().map(|c| c.name.as_str()).collect();
            let mut seen = BTreeSet::new();
            for c in &r.columns {
                if !names.contains(c.name.as_str()) {
                    return Err(invalid(format!("unknown column `{}`", c.name)));
                }
                if !seen.insert(c.name.as_str()) {
                    return Err(invalid(format!("column `{}` described twice", c.name)));
                }
                check_text("column description", &c.description)?;
                check_confidence(&c.name, c.confidence)?;
            }
            for fk in &r.foreign_keys {
                if !names.contains(fk.source_column.as_str()) {
                    return Err(invalid(format!(
                        "foreign key suggestion from unknown column `{}`",
                        fk.source_column
                    )));
                }
                check_text("foreign key target table", &fk.target_table)?;
                check_text("foreign key target column", &fk.target_column)?;
            }
            let parents: BTreeSet<String> =
                ctx.parents.iter().map(|p| p.table.to_string()).collect();
            for i in &r.parent_insights {
                if !parents.contains(&i.parent_table) {
                    return Err(invalid(format!(
                        "insight about `{}`, which is not a parent of {}",
                        i.parent_table, ctx.table
                    )));
                }
                check_text("insight", &i.insight)?;
                check_confidence("insight", i.confidence)?;
            }
            Ok(())
        }
        (RequestPayload::Revision(_), ResponsePayload::Revision(r)) => {
            check_confidence("revision", r.confidence)?;
            if r.needs_revision {
                match &r.revised_description {
                    Some(d) => check_text("revised description", d),
                    None => Err(invalid("needsRevision without revisedDescription")),
                }
            } else {
                Ok(())
            }
        }
        (
            RequestPayload::SanityLevel(ctx)
            | RequestPayload::SanitySchema(ctx)
            | RequestPayload::SanityCross(ctx),
            ResponsePayload::Sanity(r),
        ) => {
            let tables: BTreeSet<String> = ctx.tables.iter().map(|t| t.table.to_string()).collect();
            for issue in &r.issues {
                if !tables.contains(&issue.table) {
                    return Err(invalid(format!("issue about out-of-scope table `{}`", issue.table)));
                }
                check_text("issue message", &issue.message)?;
            }
            Ok(())
        }
        (RequestPayload::SemanticComparison(_), ResponsePayload::SemanticComparison(_)) => Ok(()),
        (RequestPayload::PkPruning(ctx), ResponsePayload::PkPruning(r)) => {
            for keep in &r.keep {
                if !ctx.candidates.iter().any(|c| &c.columns == keep) {
                    return Err(invalid(format!("kept unknown PK candidate {keep:?}")));
                }
            }
            Ok(())
        }
        (RequestPayload::FkPruning(ctx), ResponsePayload::FkPruning(r)) => {
            for keep in &r.keep {
                if !ctx.candidates.iter().any(|c| &c.target == keep) {
                    return Err(invalid(format!("kept unknown FK target `{keep}`")));
                }
            }
            Ok(())
        }
        (req, _) => Err(invalid(format!(
            "response kind does not match {} request",
            AnalysisRequest::new("", req.clone()).kind()
        ))),
    }
}

/// JSON Schema sent with each request to constrain the reply.
pub fn response_schema(kind: RequestKind) -> serde_json::Value {
    use serde_json::json;
    let confidence = json!({"type": "number", "minimum": 0, "maximum": 1});
    let text = json!({"type": "string", "minLength": 1});
    let object = |props: serde_json::Value, required: &[&str]| {
        json!({
            "type": "object",
            "additionalProperties": false,
            "properties": props,
            "required": required,
        })
    };
    match kind {
        RequestKind::TableAnalysis => object(
            json!({
                "tableDescription": text,
                "confidence": confidence,
                "reasoning": {"type": "string"},
                "columns": {"type": "array", "items": object(
                    json!({"name": text, "description": text, "confidence": confidence}),
                    &["name", "description", "confidence"],
                )},
                "foreignKeys": {"type": "array", "items": object(
                    json!({"sourceColumn": text, "targetTable": text, "targetColumn": text}),
                    &["sourceColumn", "targetTable", "targetColumn"],
                )},
                "parentInsights": {"type": "array", "items": object(
                    json!({"parentTable": text, "insight": text, "confidence": confidence}),
                    &["parentTable", "insight", "confidence"],
                )},
            }),
            &["tableDescription", "confidence", "reasoning", "columns", "foreignKeys", "parentInsights"],
        ),
        RequestKind::Revision => object(
            json!({
                "needsRevision": {"type": "boolean"},
                "revisedDescription": {"type": ["string", "null"]},
                "reasoning": {"type": "string"},
                "confidence": confidence,
            }),
            &["needsRevision", "revisedDescription", "reasoning", "confidence"],
        ),
        RequestKind::SanityLevel | RequestKind::SanitySchema | RequestKind::SanityCross => object(
            json!({"issues": {"type": "array", "items": object(
                json!({"table": text, "message": text}),
                &["table", "message"],
            )}}),
            &["issues"],
        ),
        RequestKind::SemanticComparison => object(
            json!({
                "classification": {"type": "string", "enum": ["material", "cosmetic"]},
                "reasoning": {"type": "string"},
            }),
            &["classification", "reasoning"],
        ),
        RequestKind::PkPruning => object(
            json!({
                "keep": {"type": "array", "items": {"type": "array", "items": text}},
                "reasoning": {"type": "string"},
            }),
            &["keep", "reasoning"],
        ),
        RequestKind::FkPruning => object(
            json!({
                "keep": {"type": "array", "items": text},
                "reasoning": {"type": "string"},
            }),
            &["keep", "reasoning"],
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_request() -> AnalysisRequest {
        AnalysisRequest::new(
            "",
            RequestPayload::TableAnalysis(TableContext {
                table: TableRef::new("dbo", "cst"),
                row_count: 2,
                iteration: 1,
                columns: vec![ColumnContext {
                    name: "cst_id".into(),
                    data_type: "INT".into(),
                    nullable: false,
                    distinct_count: 2,
                    null_fraction: 0.0,
                    sample_values: vec!["1".into()],
                    is_primary_key: true,
                    references: None,
                    description: None,
                }],
                parents: vec![],
                ground_truth_neighbors: vec![],
                known_tables: vec![],
                prior_description: None,
                prior_reasoning: None,
                violations: vec![],
            }),
        )
    }

    fn analysis(confidence: f64) -> TableAnalysis {
        TableAnalysis {
            table_description: "Customers".into(),
            confidence,
            reasoning: String::new(),
            columns: vec![],
            foreign_keys: vec![],
            parent_insights: vec![],
        }
    }

    #[test]
    fn confidence_outside_unit_interval_is_invalid() {
        let req = table_request();
        for c in [-0.1, 1.5, f64::NAN] {
            let r = validate_response(&req, &ResponsePayload::TableAnalysis(analysis(c)));
            assert!(matches!(r, Err(AnalyzerError::InvalidResponse(_))), "{c}");
        }
        assert!(validate_response(&req, &ResponsePayload::TableAnalysis(analysis(1.0))).is_ok());
    }

    #[test]
    fn insight_about_non_parent_is_invalid() {
        let req = table_request();
        let mut a = analysis(0.9);
        a.parent_insights.push(ParentInsight {
            parent_table: "dbo.rgn".into(),
            insight: "x".into(),
            confidence: 0.5,
        });
        assert!(validate_response(&req, &ResponsePayload::TableAnalysis(a)).is_err());
    }

    #[test]
    fn mismatched_kind_is_invalid() {
        let req = table_request();
        let r = ResponsePayload::Sanity(SanityReport { issues: vec![] });
        assert!(validate_response(&req, &r).is_err());
    }

    #[test]
    fn decode_rejects_unknown_fields_and_wrong_types() {
        let ok = r#"{"needsRevision":false,"revisedDescription":null,"reasoning":"","confidence":0.7}"#;
        assert!(decode_response(RequestKind::Revision, ok).is_ok());
        let extra = r#"{"needsRevision":false,"revisedDescription":null,"reasoning":"","confidence":0.7,"x":1}"#;
        assert!(decode_response(RequestKind::Revision, extra).is_err());
        let wrong = r#"{"classification":"huge","reasoning":""}"#;
        assert!(decode_response(RequestKind::SemanticComparison, wrong).is_err());
    }

    #[test]
    fn encode_decode_round_trip() {
        let p = ResponsePayload::TableAnalysis(analysis(0.5));
        let back = decode_response(RequestKind::TableAnalysis, &encode_response(&p)).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn token_estimate_is_quarter_of_characters_rounded_up() {
        assert_eq!(char_tokens(""), 0);
        assert_eq!(char_tokens("abcd"), 1);
        assert_eq!(char_tokens("abcde"), 2);
        let req = table_request();
        assert_eq!(req.estimated_input_tokens(), char_tokens(&req.canonical_json()));
    }

    #[test]
    fn sanity_requests_ask_for_high_effort() {
        let req = AnalysisRequest::new(
            "",
            RequestPayload::SanityCross(SanityContext {
                scope: "*".into(),
                tables: vec![],
            }),
        );
        assert_eq!(req.effort, Some(Effort::High));
        assert_eq!(table_request().effort, None);
        assert_eq!(req.kind().to_string(), "SANITY_CROSS");
    }
}
