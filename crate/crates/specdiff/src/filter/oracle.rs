//! The pluggable semantic-equivalence oracle: an external model behind a
//! strict two-field contract, plus deterministic stubs for offline runs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::spec::{emit::schema_to_value, SchemaNode};

/// The only shape an oracle may answer with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleAnswer {
    pub semantically_equivalent: bool,
    pub reason: String,
}

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("oracle transport failure: {0}")]
    Transport(String),
    #[error("oracle returned malformed output after retry: {0}")]
    Malformed(String),
    #[error("oracle is not configured: {0}")]
    Unconfigured(String),
}

/// Decides whether divergent responses mean the same thing.
pub trait EquivalenceOracle: Sync {
    fn check(
        &self,
        schema: Option<&SchemaNode>,
        responses: &BTreeMap<u32, Value>,
    ) -> Result<OracleAnswer, OracleError>;

    fn name(&self) -> &'static str;
}

/// Never equivalent. The conservative offline default: nothing is filtered
/// beyond the canonical tier.
#[derive(Debug, Default, Clone, Copy)]
pub struct StubFalseOracle;

impl EquivalenceOracle for StubFalseOracle {
    fn check(
        &self,
        _schema: Option<&SchemaNode>,
        _responses: &BTreeMap<u32, Value>,
    ) -> Result<OracleAnswer, OracleError> {
        Ok(OracleAnswer { semantically_equivalent: false, reason: "stub".to_string() })
    }

    fn name(&self) -> &'static str {
        "stub_false"
    }
}

/// An oracle that always fails, for exercising the conservative degradation
/// path.
#[derive(Debug, Default, Clone, Copy)]
pub struct UnavailableOracle;

impl EquivalenceOracle for UnavailableOracle {
    fn check(
        &self,
        _schema: Option<&SchemaNode>,
        _responses: &BTreeMap<u32, Value>,
    ) -> Result<OracleAnswer, OracleError> {
        Err(OracleError::Transport("oracle endpoint unreachable".to_string()))
    }

    fn name(&self) -> &'static str {
        "unavailable"
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LookupEntry {
    /// The set of distinct observed values this entry covers, in any order.
    pub values: Vec<Value>,
    pub equivalent: bool,
    pub reason: String,
}

/// Deterministic lookup oracle seeded from a file of known value sets.
/// Unknown sets answer not-equivalent, so misses degrade conservatively.
#[derive(Debug, Clone, Default)]
pub struct StubLookupOracle {
    entries: Vec<LookupEntry>,
}

impl StubLookupOracle {
    pub fn new(entries: Vec<LookupEntry>) -> Self {
        StubLookupOracle { entries }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(StubLookupOracle { entries: serde_json::from_str(text)? })
    }

    fn canonical_set(values: impl Iterator<Item = Value>) -> Vec<String> {
        let mut set: Vec<String> = Vec::new();
        for value in values {
            let text = serde_json::to_string(&value).expect("value serializes");
            if !set.contains(&text) {
                set.push(text);
            }
        }
        set.sort();
        set
    }
}

impl EquivalenceOracle for StubLookupOracle {
    fn check(
        &self,
        _schema: Option<&SchemaNode>,
        responses: &BTreeMap<u32, Value>,
    ) -> Result<OracleAnswer, OracleError> {
        let observed = Self::canonical_set(responses.values().cloned());
        for entry in &self.entries {
            if Self::canonical_set(entry.values.iter().cloned()) == observed {
                return Ok(OracleAnswer {
                    semantically_equivalent: entry.equivalent,
                    reason: entry.reason.clone(),
                });
            }
        }
        Ok(OracleAnswer {
            semantically_equivalent: false,
            reason: "no lookup entry for the observed value set".to_string(),
        })
    }

    fn name(&self) -> &'static str {
        "stub_lookup"
    }
}

/// Connection settings for an external chat-completion backend.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleBackendConfig {
    pub base_url: String,
    /// Name of the environment variable holding the bearer token. The token
    /// itself is read at call time and never logged.
    pub auth_env: String,
    pub model: String,
    pub temperature: f64,
    pub timeout_ms: u64,
}

impl Default for OracleBackendConfig {
    fn default() -> Self {
        OracleBackendConfig {
            base_url: "http://127.0.0.1:11434/v1".to_string(),
            auth_env: "ORACLE_API_KEY".to_string(),
            model: "default-model".to_string(),
            temperature: 0.0,
            timeout_ms: 30_000,
        }
    }
}

/// External oracle speaking the chat-completions wire shape. The prompt is
/// assembled from the shipped template; the answer must be exactly the
/// two-field JSON object, with one retry on malformed output.
pub struct ExternalOracle {
    config: OracleBackendConfig,
    template: String,
    client: reqwest::blocking::Client,
}

/// System/user prompt pair assembled from the template.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledPrompt {
    pub system: String,
    pub user: String,
}

pub const PROMPT_TEMPLATE: &str = include_str!("../../data/oracle_prompt.txt");
const SCHEMA_SLOT: &str = "{{SCHEMA}}";
const RESPONSES_SLOT: &str = "{{RESPONSES}}";

/// Fills the template slots. The template's first section (up to the blank
/// line after "System:") becomes the system message; the rest is the user
/// message.
pub fn assemble_prompt(
    template: &str,
    schema: Option<&SchemaNode>,
    responses: &BTreeMap<u32, Value>,
) -> AssembledPrompt {
    let schema_json = match schema {
        Some(node) => serde_json::to_string_pretty(&schema_to_value(node)).expect("schema serializes"),
        None => "{}".to_string(),
    };
    let response_list: Vec<Value> = responses
        .iter()
        .map(|(endpoint, value)| serde_json::json!({"client": endpoint, "response": value}))
        .collect();
    let responses_json =
        serde_json::to_string_pretty(&response_list).expect("responses serialize");

    let filled = template
        .replace(SCHEMA_SLOT, &schema_json)
        .replace(RESPONSES_SLOT, &responses_json);

    match filled.split_once("\n\n") {
        Some((system, user)) => AssembledPrompt {
            system: system.trim_start_matches("System: ").trim().to_string(),
            user: user.trim().to_string(),
        },
        None => AssembledPrompt { system: String::new(), user: filled },
    }
}

impl ExternalOracle {
    pub fn new(config: OracleBackendConfig) -> Self {
        ExternalOracle {
            client: reqwest::blocking::Client::builder()
                .timeout(std::time::Duration::from_millis(config.timeout_ms))
                .build()
                .expect("client builds"),
            template: PROMPT_TEMPLATE.to_string(),
            config,
        }
    }

    fn call_once(
        &self,
        prompt: &AssembledPrompt,
    ) -> Result<OracleAnswer, OracleError> {
        let body = serde_json::json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
        });
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let mut request = self.client.post(&url).json(&body);
        if let Ok(token) = std::env::var(&self.config.auth_env) {
            request = request.bearer_auth(token);
        }
        let response = request.send().map_err(|e| OracleError::Transport(e.to_string()))?;
        if !response.status().is_success() {
            return Err(OracleError::Transport(format!("status {}", response.status())));
        }
        let payload: Value =
            response.json().map_err(|e| OracleError::Transport(e.to_string()))?;
        let content = payload
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| OracleError::Malformed("no message content".to_string()))?;
        parse_strict_answer(content)
    }
}

/// Parses the oracle's reply, accepting nothing but the two-field object
/// (tolerating surrounding whitespace or a fenced block).
pub fn parse_strict_answer(content: &str) -> Result<OracleAnswer, OracleError> {
    let trimmed = content.trim();
    let trimmed = trimmed
        .strip_prefix("```json")
        .or_else(|| trimmed.strip_prefix("```"))
        .and_then(|rest| rest.strip_suffix("```"))
        .map(str::trim)
        .unwrap_or(trimmed);
    serde_json::from_str::<OracleAnswer>(trimmed)
        .map_err(|e| OracleError::Malformed(format!("{e}: {trimmed:?}")))
}

impl EquivalenceOracle for ExternalOracle {
    fn check(
        &self,
        schema: Option<&SchemaNode>,
        responses: &BTreeMap<u32, Value>,
    ) -> Result<OracleAnswer, OracleError> {
        let prompt = assemble_prompt(&self.template, schema, responses);
        match self.call_once(&prompt) {
            Ok(answer) => Ok(answer),
            // One retry on malformed output, then give up.
            Err(OracleError::Malformed(_)) => self.call_once(&prompt),
            Err(other) => Err(other),
        }
    }

    fn name(&self) -> &'static str {
        "external"
    }
}

/// Multiple backends in consensus: equivalent only when every backend
/// agrees it is.
pub struct ConsensusOracle {
    pub backends: Vec<Box<dyn EquivalenceOracle + Send>>,
}

impl EquivalenceOracle for ConsensusOracle {
    fn check(
        &self,
        schema: Option<&SchemaNode>,
        responses: &BTreeMap<u32, Value>,
    ) -> Result<OracleAnswer, OracleError> {
        if self.backends.is_empty() {
            return Err(OracleError::Unconfigured("no consensus backends".to_string()));
        }
        let mut reasons = Vec::new();
        let mut all_equivalent = true;
        for backend in &self.backends {
            let answer = backend.check(schema, responses)?;
            if !answer.semantically_equivalent {
                all_equivalent = false;
            }
            reasons.push(format!("{}: {}", backend.name(), answer.reason));
        }
        Ok(OracleAnswer { semantically_equivalent: all_equivalent, reason: reasons.join("; ") })
    }

    fn name(&self) -> &'static str {
        "consensus"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn responses(values: &[Value]) -> BTreeMap<u32, Value> {
        values.iter().cloned().enumerate().map(|(i, v)| (i as u32, v)).collect()
    }

    #[test]
    fn stub_false_never_filters() {
        let answer =
            StubFalseOracle.check(None, &responses(&[json!("a"), json!("b")])).unwrap();
        assert!(!answer.semantically_equivalent);
        assert_eq!(answer.reason, "stub");
    }

    #[test]
    fn lookup_stub_matches_the_decode_message_pair() {
        let oracle = StubLookupOracle::new(vec![LookupEntry {
            values: vec![
                json!("Unable to decode data"),
                json!("could not decode request body into the expected shape"),
            ],
            equivalent: true,
            reason: "both report a request decoding failure".to_string(),
        }]);
        let answer = oracle
            .check(
                None,
                &responses(&[
                    json!("could not decode request body into the expected shape"),
                    json!("Unable to decode data"),
                ]),
            )
            .unwrap();
        assert!(answer.semantically_equivalent);

        let miss = oracle
            .check(None, &responses(&[json!("Unable to decode data"), json!("boom")]))
            .unwrap();
        assert!(!miss.semantically_equivalent);
    }

    #[test]
    fn prompt_has_the_fixed_sections_and_inputs() {
        let mut schema = SchemaNode::of_kind(crate::spec::SchemaKind::String);
        schema.title = Some("hex encoded unsigned integer".to_string());
        let prompt = assemble_prompt(
            PROMPT_TEMPLATE,
            Some(&schema),
            &responses(&[json!("0x1"), json!("0x01")]),
        );
        assert!(prompt.system.contains("execution layer client"));
        for section in ["Task:", "Instruction:", "Input format:", "Output format:", "Note:"] {
            assert!(prompt.user.contains(section), "missing section {section}");
        }
        for numbered in ["1.", "2.", "3."] {
            assert!(prompt.user.contains(numbered), "missing instruction {numbered}");
        }
        assert!(prompt.user.contains("semantically_equivalent"));
        assert!(prompt.user.contains("hex encoded unsigned integer"));
        assert!(prompt.user.contains("0x01"));
        assert!(!prompt.user.contains(SCHEMA_SLOT));
        assert!(!prompt.user.contains(RESPONSES_SLOT));
    }

    #[test]
    fn strict_answer_rejects_extra_fields() {
        assert!(parse_strict_answer(
            r#"{"semantically_equivalent": true, "reason": "same meaning"}"#
        )
        .is_ok());
        assert!(parse_strict_answer(
            r#"{"semantically_equivalent": true, "reason": "x", "confidence": 0.9}"#
        )
        .is_err());
        assert!(parse_strict_answer("the answer is yes").is_err());
        // Fenced output is tolerated; content is still strict.
        assert!(parse_strict_answer(
            "```json\n{\"semantically_equivalent\": false, \"reason\": \"differs\"}\n```"
        )
        .is_ok());
    }

    #[test]
    fn consensus_requires_unanimity() {
        let yes = StubLookupOracle::new(vec![LookupEntry {
            values: vec![json!("a"), json!("b")],
            equivalent: true,
            reason: "known pair".to_string(),
        }]);
        let consensus = ConsensusOracle {
            backends: vec![Box::new(yes), Box::new(StubFalseOracle)],
        };
        let answer = consensus.check(None, &responses(&[json!("a"), json!("b")])).unwrap();
        assert!(!answer.semantically_equivalent);
    }
}
