//! Text-generation backends behind one interface, with an exchange log that
//! doubles as a replay log.

mod http;
mod replay;
mod simulated;
mod throttle;

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::prompt::{PromptKind, PromptRequest};

pub use http::{HttpBackend, HttpResponse, ReqwestTransport, Transport, TransportError};
pub use replay::{parse_exchange_line, ReplayBackend};
pub use simulated::SimulatedBackend;
pub use throttle::{Clock, RateLimiter, SimClock, SystemClock};

pub const API_KEY_ENV: &str = "SQLFORGE_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    /// Chat-completions URL, e.g. `https://host/v1/chat/completions`.
    pub endpoint: String,
    pub model: String,
    /// Used for SQL, schema and question prompts.
    pub temperature: f64,
    pub explore_temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub requests_per_minute: u32,
    pub backoff_base_ms: u64,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://localhost:8000/v1/chat/completions".into(),
            model: "gpt-4".into(),
            temperature: 0.2,
            explore_temperature: 0.7,
            max_tokens: 1024,
            timeout_secs: 60,
            max_retries: 3,
            requests_per_minute: 60,
            backoff_base_ms: 500,
        }
    }
}

impl GatewayConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: &str| Err(GatewayError::Config(m.into()));
        if !(self.temperature >= 0.0 && self.explore_temperature >= 0.0) {
            return bad("temperatures must be >= 0");
        }
        if self.requests_per_minute == 0 {
            return bad("requests_per_minute must be > 0");
        }
        if self.endpoint.trim().is_empty() {
            return bad("endpoint is empty");
        }
        if self.timeout_secs == 0 {
            return bad("timeout_secs must be > 0");
        }
        Ok(())
    }

    pub fn temperature_for(&self, kind: PromptKind) -> f64 {
        if kind == PromptKind::Explore {
            self.explore_temperature
        } else {
            self.temperature
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("backend unavailable after {attempts} attempt(s): {detail}")]
    BackendUnavailable { attempts: u32, detail: String },
    #[error("authentication rejected: {0}")]
    AuthError(String),
    #[error("request timed out after {attempts} attempt(s)")]
    TimeoutError { attempts: u32 },
    #[error("no recorded reply for prompt {0}")]
    UnknownPrompt(String),
    #[error("gateway configuration: {0}")]
    Config(String),
    #[error("exchange log: {0}")]
    Log(String),
}

/// What a backend sees for one call.
#[derive(Debug, Clone)]
pub struct BackendRequest<'a> {
    pub prompt: &'a PromptRequest,
    pub hash: String,
    /// Unit of work the call belongs to, such as a sample id. Lets replay
    /// keep identical prompts from different samples apart.
    pub scope: Option<&'a str>,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

impl Completion {
    pub fn text(text: impl Into<String>) -> Self {
        Self { text: text.into(), ..Self::default() }
    }
}

pub trait Backend: Send + Sync {
    fn id(&self) -> String;
    fn complete(&self, req: &BackendRequest<'_>) -> Result<Completion, GatewayError>;
}

/// One line of the exchange log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub hash: String,
    pub kind: PromptKind,
    pub request: String,
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<String>,
    pub backend: String,
    pub latency_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion_tokens: Option<u64>,
}

pub struct LlmGateway {
    backend: Arc<dyn Backend>,
    cfg: GatewayConfig,
    log: Option<Mutex<BufWriter<File>>>,
    calls: Mutex<BTreeMap<PromptKind, u64>>,
}

impl LlmGateway {
    pub fn new(backend: Arc<dyn Backend>, cfg: GatewayConfig) -> Result<Self, GatewayError> {
        cfg.validate()?;
        Ok(Self { backend, cfg, log: None, calls: Mutex::new(BTreeMap::new()) })
    }

    /// Appends every successful exchange to `path`.
    pub fn with_exchange_log(mut self, path: &Path) -> Result<Self, GatewayError> {
        let f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| GatewayError::Log(format!("{}: {e}", path.display())))?;
        self.log = Some(Mutex::new(BufWriter::new(f)));
        Ok(self)
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.cfg
    }

    pub fn backend_id(&self) -> String {
        self.backend.id()
    }

    pub fn complete(&self, prompt: &PromptRequest) -> Result<String, GatewayError> {
        self.complete_in(prompt, None)
    }

    /// Like [`LlmGateway::complete`], tagging the call with a scope.
    pub fn complete_in(&self, prompt: &PromptRequest, scope: Option<&str>) -> Result<String, GatewayError> {
        *self.calls.lock().expect("call counter").entry(prompt.kind).or_default() += 1;
        let req = BackendRequest {
            prompt,
            hash: prompt.hash(),
            scope,
            temperature: self.cfg.temperature_for(prompt.kind),
            max_tokens: self.cfg.max_tokens,
        };
        let started = Instant::now();
        let result = self.backend.complete(&req);
        let latency_ms = started.elapsed().as_millis() as u64;
        match &result {
            Ok(_) => tracing::debug!(kind = %prompt.kind, hash = %&req.hash[..12], latency_ms, "completion"),
            Err(e) => tracing::warn!(kind = %prompt.kind, hash = %&req.hash[..12], error = %e, "completion failed"),
        }
        let completion = result?;
        if let Some(log) = &self.log {
            let ex = Exchange {
                hash: req.hash,
                kind: prompt.kind,
                request: prompt.filled_text.clone(),
                response: completion.text.clone(),
                scope: scope.map(str::to_string),
                backend: self.backend.id(),
                latency_ms,
                prompt_tokens: completion.prompt_tokens,
                completion_tokens: completion.completion_tokens,
            };
            let mut w = log.lock().expect("exchange log");
            let line = serde_json::to_string(&ex).expect("exchange serializes");
            writeln!(w, "{line}").and_then(|_| w.flush()).map_err(|e| GatewayError::Log(e.to_string()))?;
        }
        Ok(completion.text)
    }

    /// Calls issued so far, per prompt kind.
    pub fn call_counts(&self) -> BTreeMap<PromptKind, u64> {
        self.calls.lock().expect("call counter").clone()
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use std::collections::HashMap;

    use super::*;

    /// Serves scripted replies per prompt kind, in order, repeating the last.
    pub struct ScriptedBackend {
        replies: Mutex<HashMap<PromptKind, (Vec<String>, usize)>>,
        pub seen: Mutex<Vec<String>>,
    }

    impl ScriptedBackend {
        pub fn new(script: &[(PromptKind, &[&str])]) -> Self {
            let replies = script.iter().map(|(k, r)| (*k, (r.iter().map(|s| s.to_string()).collect(), 0))).collect();
            Self { replies: Mutex::new(replies), seen: Mutex::new(Vec::new()) }
        }
    }

    impl Backend for ScriptedBackend {
        fn id(&self) -> String {
            "scripted".into()
        }

        fn complete(&self, req: &BackendRequest<'_>) -> Result<Completion, GatewayError> {
            self.seen.lock().unwrap().push(req.prompt.filled_text.clone());
            let mut map = self.replies.lock().unwrap();
            let (list, next) =
                map.get_mut(&req.prompt.kind).ok_or_else(|| GatewayError::UnknownPrompt(req.hash.clone()))?;
            let reply = list[(*next).min(list.len() - 1)].clone();
            *next += 1;
            Ok(Completion::text(reply))
        }
    }

    pub fn scripted(script: &[(PromptKind, &[&str])]) -> LlmGateway {
        LlmGateway::new(Arc::new(ScriptedBackend::new(script)), GatewayConfig::default()).unwrap()
    }
}
