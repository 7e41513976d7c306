//! Chat-completions client with timeout, backoff and throttling.

use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};

use super::throttle::{Clock, RateLimiter, SystemClock};
use super::{Backend, BackendRequest, Completion, GatewayConfig, GatewayError, API_KEY_ENV};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("timed out")]
    Timeout,
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("{0}")]
    Other(String),
}

/// The single HTTP operation the backend needs; swapped out in tests.
pub trait Transport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &str,
        timeout: Duration,
    ) -> Result<HttpResponse, TransportError>;
}

pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new() -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| GatewayError::Config(format!("http client: {e}")))?;
        Ok(Self { client })
    }
}

impl Transport for ReqwestTransport {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &str,
        timeout: Duration,
    ) -> Result<HttpResponse, TransportError> {
        let mut req = self
            .client
            .post(url)
            .timeout(timeout)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.to_string());
        if let Some(key) = bearer {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout
            } else if e.is_connect() {
                TransportError::Connect(e.to_string())
            } else {
                TransportError::Other(e.to_string())
            }
        })?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout
            } else {
                TransportError::Other(e.to_string())
            }
        })?;
        Ok(HttpResponse { status, body })
    }
}

pub struct HttpBackend {
    cfg: GatewayConfig,
    api_key: Option<String>,
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
    limiter: RateLimiter,
}

impl HttpBackend {
    /// Live backend reading the API key from `SQLFORGE_API_KEY`, if set.
    pub fn from_env(cfg: GatewayConfig) -> Result<Self, GatewayError> {
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Ok(Self::new(cfg, key, Arc::new(ReqwestTransport::new()?), Arc::new(SystemClock::default())))
    }

    pub fn new(
        cfg: GatewayConfig,
        api_key: Option<String>,
        transport: Arc<dyn Transport>,
        clock: Arc<dyn Clock>,
    ) -> Self {
        let limiter = RateLimiter::new(cfg.requests_per_minute);
        Self { cfg, api_key, transport, clock, limiter }
    }

    fn request_body(&self, req: &BackendRequest<'_>) -> String {
        json!({
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": req.prompt.filled_text}],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        })
        .to_string()
    }
}

fn parse_reply(body: &str) -> Result<Completion, String> {
    let v: Value = serde_json::from_str(body).map_err(|e| format!("reply is not JSON: {e}"))?;
    let text = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or("reply has no choices[0].message.content")?;
    Ok(Completion {
        text: text.to_string(),
        prompt_tokens: v.pointer("/usage/prompt_tokens").and_then(Value::as_u64),
        completion_tokens: v.pointer("/usage/completion_tokens").and_then(Value::as_u64),
    })
}

enum Failure {
    Transient(String),
    Timeout,
}

impl Backend for HttpBackend {
    fn id(&self) -> String {
        format!("http:{}", self.cfg.model)
    }

    fn complete(&self, req: &BackendRequest<'_>) -> Result<Completion, GatewayError> {
        let body = self.request_body(req);
        let timeout = Duration::from_secs(self.cfg.timeout_secs);
        let attempts = self.cfg.max_retries + 1;
        let mut last = Failure::Transient(String::new());
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.cfg.backoff_base_ms.saturating_mul(1 << (attempt - 1).min(16));
                self.clock.sleep(Duration::from_millis(delay));
            }
            self.limiter.acquire(self.clock.as_ref());
            last = match self.transport.post_json(&self.cfg.endpoint, self.api_key.as_deref(), &body, timeout) {
                Ok(resp) => match resp.status {
                    200..=299 => {
                        return parse_reply(&resp.body)
                            .map_err(|detail| GatewayError::BackendUnavailable { attempts: attempt + 1, detail })
                    }
                    401 | 403 => return Err(GatewayError::AuthError(format!("HTTP {}", resp.status))),
                    408 | 429 | 500..=599 => Failure::Transient(format!("HTTP {}", resp.status)),
                    s => {
                        return Err(GatewayError::BackendUnavailable {
                            attempts: attempt + 1,
                            detail: format!("HTTP {s}: {}", resp.body.chars().take(200).collect::<String>()),
                        })
                    }
                },
                Err(TransportError::Timeout) => Failure::Timeout,
                Err(e) => Failure::Transient(e.to_string()),
            };
        }
        Err(match last {
            Failure::Timeout => GatewayError::TimeoutError { attempts },
            Failure::Transient(detail) => GatewayError::BackendUnavailable { attempts, detail },
        })
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Mutex;

    use super::*;
    use crate::gateway::SimClock;
    use crate::prompt::{PromptKind, PromptRequest};

    struct FakeTransport {
        script: Mutex<Vec<Result<HttpResponse, TransportError>>>,
        bodies: Mutex<Vec<(Option<String>, String)>>,
    }

    impl FakeTransport {
        fn new(mut script: Vec<Result<HttpResponse, TransportError>>) -> Arc<Self> {
            script.reverse();
            Arc::new(Self { script: Mutex::new(script), bodies: Mutex::new(Vec::new()) })
        }

        fn calls(&self) -> usize {
            self.bodies.lock().unwrap().len()
        }
    }

    impl Transport for FakeTransport {
        fn post_json(
            &self,
            _: &str,
            bearer: Option<&str>,
            body: &str,
            _: Duration,
        ) -> Result<HttpResponse, TransportError> {
            self.bodies.lock().unwrap().push((bearer.map(str::to_string), body.to_string()));
            self.script.lock().unwrap().pop().expect("script exhausted")
        }
    }

    fn ok(text: &str) -> Result<HttpResponse, TransportError> {
        let body = json!({"choices": [{"message": {"role": "assistant", "content": text}}], "usage": {"prompt_tokens": 12, "completion_tokens": 3}});
        Ok(HttpResponse { status: 200, body: body.to_string() })
    }

    fn status(s: u16) -> Result<HttpResponse, TransportError> {
        Ok(HttpResponse { status: s, body: "{}".into() })
    }

    fn prompt() -> PromptRequest {
        PromptRequest { kind: PromptKind::GenerateSql, filled_text: "hello".into(), slots: Default::default() }
    }

    fn run(transport: Arc<FakeTransport>, clock: Arc<SimClock>) -> Result<Completion, GatewayError> {
        let cfg = GatewayConfig { backoff_base_ms: 250, max_retries: 3, ..GatewayConfig::default() };
        let backend = HttpBackend::new(cfg, Some("k".into()), transport, clock);
        let p = prompt();
        backend.complete(&BackendRequest { prompt: &p, hash: p.hash(), scope: None, temperature: 0.2, max_tokens: 64 })
    }

    #[test]
    fn wire_format() {
        let t = FakeTransport::new(vec![ok("SELECT 1")]);
        let c = run(t.clone(), Arc::new(SimClock::default())).unwrap();
        assert_eq!(c, Completion { text: "SELECT 1".into(), prompt_tokens: Some(12), completion_tokens: Some(3) });
        let (bearer, body) = t.bodies.lock().unwrap()[0].clone();
        assert_eq!(bearer.as_deref(), Some("k"));
        let v: Value = serde_json::from_str(&body).unwrap();
        assert_eq!(
            v,
            json!({"model": "gpt-4", "messages": [{"role": "user", "content": "hello"}], "temperature": 0.2, "max_tokens": 64})
        );
    }

    #[test]
    fn auth_error_is_not_retried() {
        let t = FakeTransport::new(vec![status(401), ok("never")]);
        let clock = Arc::new(SimClock::default());
        assert!(matches!(run(t.clone(), clock.clone()), Err(GatewayError::AuthError(_))));
        assert_eq!(t.calls(), 1);
        assert!(clock.sleeps().is_empty());
    }

    #[test]
    fn transient_then_success_backs_off() {
        let t = FakeTransport::new(vec![status(503), ok("fine")]);
        let clock = Arc::new(SimClock::default());
        assert_eq!(run(t.clone(), clock.clone()).unwrap().text, "fine");
        assert_eq!(t.calls(), 2);
        assert_eq!(clock.sleeps(), [Duration::from_millis(250)]);
    }

    #[test]
    fn exponential_backoff_then_unavailable() {
        let t = FakeTransport::new(vec![
            status(500),
            Err(TransportError::Connect("refused".into())),
            status(429),
            status(502),
        ]);
        let clock = Arc::new(SimClock::default());
        assert_eq!(
            run(t.clone(), clock.clone()),
            Err(GatewayError::BackendUnavailable { attempts: 4, detail: "HTTP 502".into() })
        );
        let ms: Vec<u128> = clock.sleeps().iter().map(Duration::as_millis).collect();
        assert_eq!(ms, [250, 500, 1000]);
    }

    #[test]
    fn timeouts() {
        let t = FakeTransport::new(vec![Err(TransportError::Timeout); 4]);
        assert_eq!(run(t, Arc::new(SimClock::default())), Err(GatewayError::TimeoutError { attempts: 4 }));
    }

    #[test]
    fn client_errors_and_bad_bodies() {
        let t = FakeTransport::new(vec![status(400)]);
        assert!(matches!(
            run(t.clone(), Arc::new(SimClock::default())),
            Err(GatewayError::BackendUnavailable { attempts: 1, .. })
        ));
        let t = FakeTransport::new(vec![Ok(HttpResponse { status: 200, body: "not json".into() })]);
        assert!(matches!(run(t, Arc::new(SimClock::default())), Err(GatewayError::BackendUnavailable { .. })));
    }
}
