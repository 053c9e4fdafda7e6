//! Completion-endpoint client and deterministic stand-ins.
//!
//! Only the assembled prompt ever goes over the wire. Stubs that need gold
//! answers (the oracle) get them from a lookup built locally, keyed by record
//! id.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::eval::{gold_answer, Answer};
use crate::promptgen::PromptRecord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClientError {
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("authentication rejected (HTTP {status}): {body}")]
    Auth { status: u16, body: String },
    #[error("transport failure after {attempts} attempt(s){}: {message}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Transport {
        status: Option<u16>,
        attempts: u32,
        message: String,
    },
    #[error("malformed response envelope: {0}")]
    Envelope(String),
    #[error("client configuration: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeKind {
    #[default]
    Completion,
    Chat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClientConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding a bearer token.
    pub auth_env: Option<String>,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub max_in_flight: usize,
    pub temperature: f64,
    pub max_tokens: u32,
    pub envelope: EnvelopeKind,
    /// First retry delay; doubles on every further attempt.
    pub backoff_ms: u64,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            endpoint: String::new(),
            model: String::new(),
            auth_env: None,
            timeout_secs: 60.0,
            max_retries: 2,
            max_in_flight: 4,
            temperature: 0.0,
            max_tokens: 256,
            envelope: EnvelopeKind::Completion,
            backoff_ms: 500,
        }
    }
}

impl ClientConfig {
    pub fn validate(&self) -> Result<(), ClientError> {
        if self.max_in_flight == 0 {
            return Err(ClientError::Config("max_in_flight must be at least 1".into()));
        }
        if !self.timeout_secs.is_finite() || self.timeout_secs <= 0.0 {
            return Err(ClientError::Config("timeout_secs must be positive".into()));
        }
        Ok(())
    }
}

pub trait Completer: Sync {
    /// `id` identifies the record locally; it is never sent to an endpoint.
    fn complete(&self, id: &str, prompt: &str) -> Result<String, ClientError>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StubPolicy {
    /// Answers every record correctly from its gold label.
    Oracle,
    ConstantNo,
    ConstantYes,
    /// Returns the prompt unchanged.
    Echo,
}

impl std::str::FromStr for StubPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(StubPolicy::Oracle),
            "constant_no" => Ok(StubPolicy::ConstantNo),
            "constant_yes" => Ok(StubPolicy::ConstantYes),
            "echo" => Ok(StubPolicy::Echo),
            other => Err(format!(
                "unknown stub policy {other:?} (expected oracle, constant_no, constant_yes or echo)"
            )),
        }
    }
}

impl std::fmt::Display for StubPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StubPolicy::Oracle => "oracle",
            StubPolicy::ConstantNo => "constant_no",
            StubPolicy::ConstantYes => "constant_yes",
            StubPolicy::Echo => "echo",
        })
    }
}

pub struct StubCompleter {
    policy: StubPolicy,
    gold: HashMap<String, String>,
}

/// Canonical answer text for a gold answer.
pub fn answer_text(answer: Answer) -> String {
    match answer {
        Answer::Yes => "The answer is yes.".into(),
        Answer::No => "The answer is no.".into(),
        Answer::Relation(r) => format!(
            "The relationship between the first node and the last node is relation_{r}."
        ),
        Answer::Unparseable => String::new(),
    }
}

impl StubCompleter {
    pub fn new(policy: StubPolicy) -> Self {
        StubCompleter {
            policy,
            gold: HashMap::new(),
        }
    }

    /// An oracle stub answering the given records.
    pub fn oracle(records: &[PromptRecord]) -> Self {
        StubCompleter {
            policy: StubPolicy::Oracle,
            gold: records
                .iter()
                .map(|r| (r.meta.id.clone(), answer_text(gold_answer(r))))
                .collect(),
        }
    }

    pub fn for_records(policy: StubPolicy, records: &[PromptRecord]) -> Self {
        match policy {
            StubPolicy::Oracle => Self::oracle(records),
            other => Self::new(other),
        }
    }
}

impl Completer for StubCompleter {
    fn complete(&self, id: &str, prompt: &str) -> Result<String, ClientError> {
        match self.policy {
            StubPolicy::Oracle => self
                .gold
                .get(id)
                .cloned()
                .ok_or_else(|| ClientError::Config(format!("oracle stub has no gold answer for {id}"))),
            StubPolicy::ConstantNo => Ok(answer_text(Answer::No)),
            StubPolicy::ConstantYes => Ok(answer_text(Answer::Yes)),
            StubPolicy::Echo => Ok(prompt.to_string()),
        }
    }
}

pub struct HttpCompleter {
    cfg: ClientConfig,
    http: reqwest::blocking::Client,
    token: Option<String>,
}

impl HttpCompleter {
    pub fn new(cfg: ClientConfig) -> Result<Self, ClientError> {
        cfg.validate()?;
        if cfg.endpoint.is_empty() {
            return Err(ClientError::Config("endpoint URL is empty".into()));
        }
        let token = match &cfg.auth_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                ClientError::Config(format!("auth token variable {var} is not set"))
            })?),
            None => None,
        };
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_secs))
            .build()
            .map_err(|e| ClientError::Config(e.to_string()))?;
        Ok(HttpCompleter { cfg, http, token })
    }

    pub fn request_body(&self, prompt: &str) -> Value {
        request_body(&self.cfg, prompt)
    }
}

pub fn request_body(cfg: &ClientConfig, prompt: &str) -> Value {
    match cfg.envelope {
        EnvelopeKind::Completion => json!({
            "model": cfg.model,
            "prompt": prompt,
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_tokens,
        }),
        EnvelopeKind::Chat => json!({
            "model": cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_tokens,
        }),
    }
}

/// Pulls the generated text out of a completion or chat response.
pub fn extract_text(kind: EnvelopeKind, body: &str) -> Result<String, ClientError> {
    let v: Value = serde_json::from_str(body)
        .map_err(|e| ClientError::Envelope(format!("invalid JSON: {e}")))?;
    let choice = v
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| ClientError::Envelope("missing choices[0]".into()))?;
    let text = match kind {
        EnvelopeKind::Completion => choice.get("text"),
        EnvelopeKind::Chat => choice.get("message").and_then(|m| m.get("content")),
    };
    text.and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| ClientError::Envelope(format!("no {kind:?} text in choices[0]")))
}

fn excerpt(body: &str) -> String {
    const MAX: usize = 200;
    match body.char_indices().nth(MAX) {
        Some((i, _)) => format!("{}…", &body[..i]),
        None => body.to_string(),
    }
}

enum Attempt {
    Done(String),
    Retry(ClientError),
    Fail(ClientError),
}

impl HttpCompleter {
    fn attempt(&self, prompt: &str, attempts: u32) -> Attempt {
        let mut req = self.http.post(&self.cfg.endpoint).json(&self.request_body(prompt));
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Attempt::Retry(ClientError::Timeout { attempts }),
            Err(e) => {
                return Attempt::Retry(ClientError::Transport {
                    status: None,
                    attempts,
                    message: e.to_string(),
                })
            }
        };
        let status = resp.status();
        let body = match resp.text() {
            Ok(b) => b,
            Err(e) if e.is_timeout() => return Attempt::Retry(ClientError::Timeout { attempts }),
            Err(e) => {
                return Attempt::Retry(ClientError::Transport {
                    status: Some(status.as_u16()),
                    attempts,
                    message: e.to_string(),
                })
            }
        };
        if status.is_success() {
            return match extract_text(self.cfg.envelope, &body) {
                Ok(t) => Attempt::Done(t),
                Err(e) => Attempt::Fail(e),
            };
        }
        let code = status.as_u16();
        if code == 401 || code == 403 {
            return Attempt::Fail(ClientError::Auth {
                status: code,
                body: excerpt(&body),
            });
        }
        let err = ClientError::Transport {
            status: Some(code),
            attempts,
            message: excerpt(&body),
        };
        if status.is_server_error() || code == 429 || code == 408 {
            Attempt::Retry(err)
        } else {
            Attempt::Fail(err)
        }
    }
}

impl Completer for HttpCompleter {
    fn complete(&self, _id: &str, prompt: &str) -> Result<String, ClientError> {
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(prompt, attempts) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e) if attempts > self.cfg.max_retries => return Err(e),
                Attempt::Retry(e) => {
                    let delay = self.cfg.backoff_ms.saturating_mul(1 << (attempts - 1).min(16));
                    log::debug!("attempt {attempts} failed ({e}); retrying in {delay} ms");
                    std::thread::sleep(Duration::from_millis(delay));
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchItem {
    pub id: String,
    pub prompt: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchResult {
    pub id: String,
    pub response: Result<String, ClientError>,
}

/// Completes every item with at most `max_in_flight` concurrent requests.
/// Results come back in input order; a failed item does not stop the batch.
pub fn run_batch(items: &[BatchItem], completer: &dyn Completer, max_in_flight: usize) -> Vec<BatchResult> {
    let workers = max_in_flight.max(1).min(items.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<String, ClientError>>>> = Mutex::new(vec![None; items.len()]);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                let response = completer.complete(&item.id, &item.prompt);
                slots.lock().unwrap()[i] = Some(response);
            });
        }
    });
    items
        .iter()
        .zip(slots.into_inner().unwrap())
        .map(|(item, slot)| BatchResult {
            id: item.id.clone(),
            response: slot.expect("every slot filled once workers join"),
        })
        .collect()
}
