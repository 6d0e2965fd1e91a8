//! Chat-completion client speaking a small JSON protocol.
//!
//! Request body:
//! `{"model", "messages": [{"role", "content"}], "responseSchema", "temperature", "effort"?}`.
//! Response body: `{"content": "<json text>", "usage": {"inputTokens", "outputTokens"}}`.

use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::templates::Templates;
use super::{
    decode_response, response_schema, validate_response, AnalysisRequest, AnalysisResponse,
    Analyzer, TokenUsage,
};
use crate::error::AnalyzerError;

const SYSTEM_PROMPT: &str = "You document relational database schemas. Answer only with a \
JSON document that satisfies the supplied JSON Schema.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding a bearer token; unset means no
    /// `Authorization` header.
    pub api_key_env: Option<String>,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
    pub timeout_seconds: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model: String::new(),
            api_key_env: Some("DARKDOC_API_KEY".into()),
            max_retries: 3,
            initial_backoff_ms: 500,
            max_backoff_ms: 8_000,
            timeout_seconds: 120,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct Message {
    role: &'static str,
    content: String,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [Message],
    response_schema: serde_json::Value,
    temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    effort: Option<super::Effort>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct WireUsage {
    input_tokens: u64,
    output_tokens: u64,
}

#[derive(Debug, Deserialize)]
struct WireResponse {
    content: String,
    usage: WireUsage,
}

pub struct HttpAnalyzer {
    config: HttpConfig,
    token: Option<String>,
    templates: Templates,
    agent: ureq::Agent,
}

impl HttpAnalyzer {
    pub fn new(config: HttpConfig, templates: Templates) -> Result<Self, AnalyzerError> {
        let token = match &config.api_key_env {
            Some(var) => Some(
                std::env::var(var).map_err(|_| AnalyzerError::MissingCredential(var.clone()))?,
            ),
            None => None,
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_seconds)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            config,
            token,
            templates,
            agent,
        })
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let base = self
            .config
            .initial_backoff_ms
            .saturating_mul(1u64 << attempt.min(20))
            .min(self.config.max_backoff_ms);
        let jitter = if base > 1 {
            rand::rng().random_range(0..=base / 2)
        } else {
            0
        };
        Duration::from_millis(base + jitter)
    }

    /// One exchange with transport retries.
    fn post(&self, request: &AnalysisRequest, messages: &[Message]) -> Result<(String, TokenUsage), AnalyzerError> {
        let body = WireRequest {
            model: &self.config.model,
            messages,
            response_schema: response_schema(request.kind()),
            temperature: request.temperature,
            effort: request.effort,
        };
        let mut last = String::new();
        let attempts = self.config.max_retries + 1;
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(self.backoff(attempt - 1));
            }
            let mut req = self.agent.post(&self.config.endpoint);
            if let Some(t) = &self.token {
                req = req.header("Authorization", &format!("Bearer {t}"));
            }
            match req.send_json(&body) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    if status == 429 || status >= 500 {
                        last = format!("HTTP {status}");
                        log::warn!("analyzer endpoint returned {status}; retrying");
                        continue;
                    }
                    if status >= 400 {
                        return Err(AnalyzerError::Transport {
                            attempts: attempt + 1,
                            message: format!("HTTP {status}"),
                        });
                    }
                    let text = resp.body_mut().read_to_string().map_err(|e| {
                        AnalyzerError::InvalidResponse(format!("unreadable body: {e}"))
                    })?;
                    return decode_envelope(&text);
                }
                Err(e) => {
                    last = e.to_string();
                    log::warn!("analyzer request failed: {last}");
                }
            }
        }
        Err(AnalyzerError::Transport {
            attempts,
            message: last,
        })
    }
}

/// Completion text and token counts from a response body.
pub fn decode_envelope(body: &str) -> Result<(String, TokenUsage), AnalyzerError> {
    let wire: WireResponse = serde_json::from_str(body)
        .map_err(|e| AnalyzerError::InvalidResponse(format!("malformed envelope: {e}")))?;
    let usage = TokenUsage {
        input: wire.usage.input_tokens,
        output: wire.usage.output_tokens,
    };
    Ok((wire.content, usage))
}

/// Drops a surrounding Markdown code fence.
pub fn strip_fences(s: &str) -> &str {
    let t = s.trim();
    let t = t.strip_prefix("```json").or_else(|| t.strip_prefix("```")).unwrap_or(t);
    t.strip_suffix("```").unwrap_or(t).trim()
}

impl Analyzer for HttpAnalyzer {
    fn model(&self) -> &str {
        &self.config.model
    }

    fn complete(&self, request: &AnalysisRequest) -> Result<AnalysisResponse, AnalyzerError> {
        let prompt = self.templates.render(request)?;
        let mut messages = vec![
            Message {
                role: "system",
                content: SYSTEM_PROMPT.into(),
            },
            Message {
                role: "user",
                content: prompt,
            },
        ];
        let mut usage = TokenUsage::default();
        let mut repaired = false;
        loop {
            let (content, used) = self.post(request, &messages)?;
            usage.add(used);
            let checked = decode_response(request.kind(), strip_fences(&content))
                .and_then(|p| validate_response(request, &p).map(|_| p));
            match checked {
                Ok(payload) => return Ok(AnalysisResponse { payload, usage }),
                Err(e) if !repaired => {
                    log::warn!("invalid {} response, asking for a repair: {e}", request.kind());
                    repaired = true;
                    messages.push(Message {
                        role: "assistant",
                        content,
                    });
                    messages.push(Message {
                        role: "user",
                        content: format!(
                            "That reply was rejected: {e}. Reply again with only JSON that \
                             satisfies the schema."
                        ),
                    });
                }
                Err(e) => return Err(e),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    use super::*;
    use crate::analyzer::{ComparisonContext, RequestPayload, ResponsePayload};

    fn config(endpoint: String) -> HttpConfig {
        HttpConfig {
            endpoint,
            model: "test-model".into(),
            api_key_env: None,
            max_retries: 2,
            initial_backoff_ms: 1,
            max_backoff_ms: 2,
            timeout_seconds: 5,
        }
    }

    fn request() -> AnalysisRequest {
        AnalysisRequest::new(
            "",
            RequestPayload::SemanticComparison(ComparisonContext {
                object: "dbo.t".into(),
                old_description: "a".into(),
                new_description: "b".into(),
            }),
        )
    }

    /// Serves one canned body per connection and returns the request bodies.
    fn serve(bodies: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = format!("http://{}/v1/complete", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let mut seen = Vec::new();
            for (status, body) in bodies {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream);
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                seen.push(String::from_utf8(buf).unwrap());
                let mut stream = reader.into_inner();
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
            seen
        });
        (addr, handle)
    }

    fn envelope(content: &str, input: u64, output: u64) -> String {
        serde_json::json!({
            "content": content,
            "usage": {"inputTokens": input, "outputTokens": output}
        })
        .to_string()
    }

    #[test]
    fn unreachable_endpoint_fails_after_bounded_retries() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        drop(listener);
        let a = HttpAnalyzer::new(config(format!("http://{addr}/")), Templates::builtin()).unwrap();
        match a.complete(&request()) {
            Err(AnalyzerError::Transport { attempts, .. }) => assert_eq!(attempts, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn server_errors_are_retried_then_succeed() {
        let ok = envelope(r#"{"classification":"material","reasoning":"r"}"#, 10, 4);
        let (addr, handle) = serve(vec![(503, "{}".into()), (200, ok)]);
        let a = HttpAnalyzer::new(config(addr), Templates::builtin()).unwrap();
        let r = a.complete(&request()).unwrap();
        assert!(matches!(r.payload, ResponsePayload::SemanticComparison(_)));
        assert_eq!(r.usage, TokenUsage { input: 10, output: 4 });
        let bodies = handle.join().unwrap();
        let sent: serde_json::Value = serde_json::from_str(&bodies[1]).unwrap();
        assert_eq!(sent["model"], "test-model");
        assert_eq!(sent["temperature"], 0.1);
        assert_eq!(sent["responseSchema"]["required"][0], "classification");
    }

    #[test]
    fn one_repair_retry_for_invalid_payload() {
        let bad = envelope(r#"{"classification":"big"}"#, 5, 1);
        let good = envelope("```json\n{\"classification\":\"cosmetic\",\"reasoning\":\"\"}\n```", 7, 2);
        let (addr, handle) = serve(vec![(200, bad), (200, good)]);
        let a = HttpAnalyzer::new(config(addr), Templates::builtin()).unwrap();
        let r = a.complete(&request()).unwrap();
        assert_eq!(r.usage, TokenUsage { input: 12, output: 3 });
        let bodies = handle.join().unwrap();
        let repair: serde_json::Value = serde_json::from_str(&bodies[1]).unwrap();
        assert_eq!(repair["messages"].as_array().unwrap().len(), 4);
    }

    #[test]
    fn second_invalid_payload_is_an_error() {
        let bad = envelope("not json", 1, 1);
        let (addr, handle) = serve(vec![(200, bad.clone()), (200, bad)]);
        let a = HttpAnalyzer::new(config(addr), Templates::builtin()).unwrap();
        assert!(matches!(a.complete(&request()), Err(AnalyzerError::InvalidResponse(_))));
        handle.join().unwrap();
    }

    #[test]
    fn missing_credential_is_reported() {
        let mut c = config("http://127.0.0.1:9/".into());
        c.api_key_env = Some("DARKDOC_TEST_UNSET_VARIABLE".into());
        assert!(matches!(
            HttpAnalyzer::new(c, Templates::builtin()),
            Err(AnalyzerError::MissingCredential(_))
        ));
    }
}
