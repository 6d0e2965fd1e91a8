//! Prompt templates with `{{name}}` placeholder substitution.
//!
//! Built-in templates are compiled in; a directory of `<name>.txt` files can
//! override any of them.

use std::collections::BTreeMap;
use std::path::Path;

use super::{response_schema, AnalysisRequest, RequestKind, RequestPayload};
use crate::error::AnalyzerError;

const BUILTIN: [(&str, &str); 8] = [
    ("table-analysis", include_str!("../../templates/table-analysis.txt")),
    ("backpropagation", include_str!("../../templates/backpropagation.txt")),
    ("fk-pruning", include_str!("../../templates/fk-pruning.txt")),
    ("pk-pruning", include_str!("../../templates/pk-pruning.txt")),
    ("dep-level-sanity", include_str!("../../templates/dep-level-sanity.txt")),
    ("schema-sanity", include_str!("../../templates/schema-sanity.txt")),
    ("cross-schema-sanity", include_str!("../../templates/cross-schema-sanity.txt")),
    ("semantic-comparison", include_str!("../../templates/semantic-comparison.txt")),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Templates {
    by_name: BTreeMap<String, String>,
}

impl Default for Templates {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Templates {
    pub fn builtin() -> Self {
        Self {
            by_name: BUILTIN
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    /// Built-ins overridden by any `<name>.txt` present in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, AnalyzerError> {
        let mut t = Self::builtin();
        for kind in RequestKind::ALL {
            let path = dir.join(format!("{}.txt", kind.template()));
            if path.exists() {
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    AnalyzerError::Template(format!("cannot read {}: {e}", path.display()))
                })?;
                t.by_name.insert(kind.template().to_string(), text);
            }
        }
        Ok(t)
    }

    pub fn get(&self, kind: RequestKind) -> &str {
        &self.by_name[kind.template()]
    }

    pub fn render(&self, request: &AnalysisRequest) -> Result<String, AnalyzerError> {
        let kind = request.kind();
        let mut vars = BTreeMap::new();
        vars.insert("kind", kind.to_string());
        vars.insert("seed_context", request.seed_context.clone());
        vars.insert("context", context_json(&request.payload));
        vars.insert(
            "response_schema",
            serde_json::to_string_pretty(&response_schema(kind)).expect("schema serializes"),
        );
        substitute(self.get(kind), &vars)
    }
}

fn context_json(payload: &RequestPayload) -> String {
    let v = serde_json::to_value(payload).expect("payload serializes");
    serde_json::to_string_pretty(&v["context"]).expect("value serializes")
}

/// Replaces every `{{ name }}`. Unknown names and unterminated braces are
/// errors.
pub fn substitute(template: &str, vars: &BTreeMap<&str, String>) -> Result<String, AnalyzerError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after
            .find("}}")
            .ok_or_else(|| AnalyzerError::Template("unterminated placeholder".into()))?;
        let name = after[..end].trim();
        let value = vars
            .get(name)
            .ok_or_else(|| AnalyzerError::Template(format!("unknown placeholder `{name}`")))?;
        out.push_str(value);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::ComparisonContext;

    #[test]
    fn every_kind_has_a_template_that_renders() {
        let t = Templates::builtin();
        let req = AnalysisRequest::new(
            "Retail chain",
            RequestPayload::SemanticComparison(ComparisonContext {
                object: "dbo.t".into(),
                old_description: "a".into(),
                new_description: "b".into(),
            }),
        );
        let text = t.render(&req).unwrap();
        assert!(text.contains("Retail chain"));
        assert!(text.contains("\"oldDescription\": \"a\""));
        assert!(!text.contains("{{"));
        for kind in RequestKind::ALL {
            let body = t.get(kind);
            assert!(body.contains("{{context}}"), "{kind}");
            assert!(body.contains("{{seed_context}}"), "{kind}");
        }
    }

    #[test]
    fn substitution_errors() {
        let vars = BTreeMap::from([("a", "1".to_string())]);
        assert_eq!(substitute("x{{ a }}y", &vars).unwrap(), "x1y");
        assert!(substitute("{{b}}", &vars).is_err());
        assert!(substitute("{{a", &vars).is_err());
    }

    #[test]
    fn directory_overrides_builtin() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("schema-sanity.txt"), "custom {{context}}").unwrap();
        let t = Templates::load_dir(dir.path()).unwrap();
        assert_eq!(t.get(RequestKind::SanitySchema), "custom {{context}}");
        assert_eq!(t.get(RequestKind::Revision), Templates::builtin().get(RequestKind::Revision));
    }
}
