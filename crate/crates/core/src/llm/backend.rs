//! Completion backends: the offline mock, a generic chat-completion HTTP
//! client, and test doubles.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::mock::MockBackend;
use super::prompt::Prompt;

/// Selects the default backend kind (`mock` or `http`).
pub const BACKEND_ENV: &str = "AUTOIOT_BACKEND";

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("request timed out")]
    Timeout,
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("server answered with status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed completion response: {0}")]
    Malformed(String),
    #[error("backend refused contact: {0}")]
    Refused(String),
}

pub trait Backend: Send + Sync {
    fn complete(&self, prompt: &Prompt) -> Result<String, BackendError>;

    fn describe(&self) -> String;
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpSettings {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub credential_env: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendKind {
    Mock,
    Http(HttpSettings),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendConfig {
    #[serde(flatten)]
    pub kind: BackendKind,
    pub timeout_secs: u64,
    pub max_retries: u32,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig { kind: BackendKind::Mock, timeout_secs: 60, max_retries: 2 }
    }
}

impl BackendConfig {
    pub fn mock() -> Self {
        BackendConfig::default()
    }

    pub fn http(settings: HttpSettings) -> Self {
        BackendConfig { kind: BackendKind::Http(settings), ..BackendConfig::default() }
    }

    /// The kind named by the selection variable, `None` when it is unset.
    pub fn kind_from_env() -> Result<Option<&'static str>, BackendError> {
        match std::env::var(BACKEND_ENV) {
            Err(_) => Ok(None),
            Ok(v) if v == "mock" => Ok(Some("mock")),
            Ok(v) if v == "http" => Ok(Some("http")),
            Ok(v) => Err(BackendError::Config(format!("{BACKEND_ENV}={v}: expected `mock` or `http`"))),
        }
    }

    /// Builds the backend. For HTTP the credential is read here, so a
    /// missing variable fails before anything touches the network.
    pub fn connect(&self) -> Result<Box<dyn Backend>, BackendError> {
        match &self.kind {
            BackendKind::Mock => Ok(Box::new(MockBackend)),
            BackendKind::Http(s) => Ok(Box::new(HttpBackend::new(s.clone(), self.timeout_secs, self.max_retries)?)),
        }
    }
}

/// One completion with a freshly built backend.
pub fn complete(prompt: &Prompt, config: &BackendConfig) -> Result<String, BackendError> {
    config.connect()?.complete(prompt)
}

pub struct HttpBackend {
    settings: HttpSettings,
    token: String,
    timeout: Duration,
    max_retries: u32,
    backoff: Duration,
}

impl HttpBackend {
    pub fn new(settings: HttpSettings, timeout_secs: u64, max_retries: u32) -> Result<Self, BackendError> {
        if settings.base_url.is_empty() || settings.model.is_empty() {
            return Err(BackendError::Config("http backend needs a base url and a model name".into()));
        }
        let token = std::env::var(&settings.credential_env)
            .map_err(|_| BackendError::Config(format!("credential variable `{}` is not set", settings.credential_env)))?;
        Ok(HttpBackend {
            settings,
            token,
            timeout: Duration::from_secs(timeout_secs),
            max_retries,
            backoff: Duration::from_millis(250),
        })
    }

    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.settings.base_url.trim_end_matches('/'))
    }

    pub fn request_body(&self, prompt: &Prompt) -> Value {
        json!({
            "model": self.settings.model,
            "messages": [{"role": "user", "content": prompt.render()}],
            "temperature": 0,
        })
    }
}

fn assistant_text(body: &str) -> Result<String, BackendError> {
    let v: Value = serde_json::from_str(body).map_err(|e| BackendError::Malformed(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| BackendError::Malformed("missing choices[0].message.content".into()))
}

impl Backend for HttpBackend {
    fn complete(&self, prompt: &Prompt) -> Result<String, BackendError> {
        if self.timeout.is_zero() {
            return Err(BackendError::Timeout);
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        let body = self.request_body(prompt);
        let mut attempt = 0;
        loop {
            attempt += 1;
            let sent = client.post(self.endpoint()).bearer_auth(&self.token).json(&body).send();
            match sent {
                Ok(resp) => {
                    let status = resp.status();
                    let text = resp.text().map_err(|e| BackendError::Malformed(e.to_string()))?;
                    if !status.is_success() {
                        return Err(BackendError::Status { status: status.as_u16(), body: text });
                    }
                    return assistant_text(&text);
                }
                Err(e) if attempt > self.max_retries => {
                    return Err(if e.is_timeout() {
                        BackendError::Timeout
                    } else {
                        BackendError::Transport { attempts: attempt, message: e.to_string() }
                    });
                }
                Err(_) => std::thread::sleep(self.backoff * 2u32.pow(attempt - 1)),
            }
        }
    }

    fn describe(&self) -> String {
        format!("http {} model {}", self.endpoint(), self.settings.model)
    }
}

/// Replays canned answers in order and records every prompt it saw.
#[derive(Default)]
pub struct ScriptedBackend {
    answers: Mutex<VecDeque<Result<String, BackendError>>>,
    seen: Mutex<Vec<Prompt>>,
}

impl ScriptedBackend {
    pub fn new(answers: impl IntoIterator<Item = Result<String, BackendError>>) -> Self {
        ScriptedBackend { answers: Mutex::new(answers.into_iter().collect()), seen: Mutex::default() }
    }

    pub fn prompts(&self) -> Vec<Prompt> {
        self.seen.lock().unwrap().clone()
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, prompt: &Prompt) -> Result<String, BackendError> {
        self.seen.lock().unwrap().push(prompt.clone());
        self.answers.lock().unwrap().pop_front().unwrap_or_else(|| Err(BackendError::Refused("script exhausted".into())))
    }

    fn describe(&self) -> String {
        "scripted".into()
    }
}

/// Fails every request and counts the attempts; proves a path is offline.
#[derive(Default)]
pub struct RefusingBackend {
    contacts: AtomicUsize,
}

impl RefusingBackend {
    pub fn contacts(&self) -> usize {
        self.contacts.load(Ordering::SeqCst)
    }
}

impl Backend for RefusingBackend {
    fn complete(&self, _prompt: &Prompt) -> Result<String, BackendError> {
        self.contacts.fetch_add(1, Ordering::SeqCst);
        Err(BackendError::Refused("this path must stay offline".into()))
    }

    fn describe(&self) -> String {
        "refusing".into()
    }
}
