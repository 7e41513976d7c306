//! Serving recorded exchanges by prompt hash.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;
use std::sync::Mutex;

use super::{Backend, BackendRequest, Completion, Exchange, GatewayError};
use crate::prompt::prompt_hash;

type Key = (Option<String>, String);

/// Replies keyed by prompt hash. Repeated prompts get the recorded replies in
/// order; once those run out the last one is repeated. Exchanges recorded
/// with a scope are served to calls in the same scope first, so concurrent
/// samples that send the same prompt each see their own sequence.
pub struct ReplayBackend {
    replies: HashMap<Key, Vec<String>>,
    cursor: Mutex<HashMap<Key, usize>>,
}

impl ReplayBackend {
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let f = std::fs::File::open(path).map_err(|e| GatewayError::Log(format!("{}: {e}", path.display())))?;
        Self::from_reader(std::io::BufReader::new(f))
    }

    pub fn from_reader<R: BufRead>(input: R) -> Result<Self, GatewayError> {
        let mut replies: HashMap<Key, Vec<String>> = HashMap::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| GatewayError::Log(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let ex = parse_exchange_line(&line).map_err(|e| GatewayError::Log(format!("line {}: {e}", i + 1)))?;
            if ex.scope.is_some() {
                replies.entry((ex.scope, ex.hash.clone())).or_default().push(ex.response.clone());
            }
            replies.entry((None, ex.hash)).or_default().push(ex.response);
        }
        Ok(Self { replies, cursor: Mutex::new(HashMap::new()) })
    }

    /// Distinct prompts in the log.
    pub fn prompt_count(&self) -> usize {
        self.replies.keys().filter(|(scope, _)| scope.is_none()).count()
    }
}

/// Parses one exchange-log line and checks its hash against the request text.
pub fn parse_exchange_line(line: &str) -> Result<Exchange, String> {
    let ex: Exchange = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let actual = prompt_hash(&ex.request);
    if actual != ex.hash {
        return Err(format!("hash {} does not match request (expected {actual})", ex.hash));
    }
    Ok(ex)
}

impl Backend for ReplayBackend {
    fn id(&self) -> String {
        "replay".into()
    }

    fn complete(&self, req: &BackendRequest<'_>) -> Result<Completion, GatewayError> {
        let scoped = (req.scope.map(str::to_string), req.hash.clone());
        let key = if self.replies.contains_key(&scoped) { scoped } else { (None, req.hash.clone()) };
        let list = self.replies.get(&key).ok_or_else(|| GatewayError::UnknownPrompt(req.hash.clone()))?;
        let mut cursor = self.cursor.lock().expect("replay cursor");
        let n = cursor.entry(key).or_default();
        let reply = list[(*n).min(list.len() - 1)].clone();
        *n += 1;
        Ok(Completion::text(reply))
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::gateway::{testing::ScriptedBackend, GatewayConfig, LlmGateway};
    use crate::prompt::{PromptKind, PromptRequest};

    fn prompt(text: &str) -> PromptRequest {
        PromptRequest { kind: PromptKind::ReverseTranslate, filled_text: text.into(), slots: Default::default() }
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("ex.jsonl");
        let replies: Vec<String> = (0..5).map(|i| format!("reply {i}")).collect();
        let reply_refs: Vec<&str> = replies.iter().map(String::as_str).collect();
        let live = LlmGateway::new(
            Arc::new(ScriptedBackend::new(&[(PromptKind::ReverseTranslate, &reply_refs)])),
            GatewayConfig::default(),
        )
        .unwrap()
        .with_exchange_log(&log)
        .unwrap();
        let recorded: Vec<String> = (0..5).map(|i| live.complete(&prompt(&format!("p{i}"))).unwrap()).collect();
        drop(live);

        let replay = LlmGateway::new(Arc::new(ReplayBackend::load(&log).unwrap()), GatewayConfig::default()).unwrap();
        let replayed: Vec<String> = (0..5).map(|i| replay.complete(&prompt(&format!("p{i}"))).unwrap()).collect();
        assert_eq!(recorded, replayed);
        assert_eq!(replay.complete(&prompt("unseen")), Err(GatewayError::UnknownPrompt(prompt("unseen").hash())));
    }

    #[test]
    fn repeated_prompts_advance_then_stick() {
        let mk = |resp: &str| {
            serde_json::to_string(&Exchange {
                hash: prompt_hash("q"),
                kind: PromptKind::GenerateSql,
                request: "q".into(),
                response: resp.into(),
                scope: None,
                backend: "x".into(),
                latency_ms: 0,
                prompt_tokens: None,
                completion_tokens: None,
            })
            .unwrap()
        };
        let text = format!("{}\n{}\n", mk("first"), mk("second"));
        let b = ReplayBackend::from_reader(text.as_bytes()).unwrap();
        let p = prompt("q");
        let req = BackendRequest { prompt: &p, hash: p.hash(), scope: None, temperature: 0.0, max_tokens: 1 };
        let got: Vec<String> = (0..3).map(|_| b.complete(&req).unwrap().text).collect();
        assert_eq!(got, ["first", "second", "second"]);
    }

    #[test]
    fn scopes_keep_identical_prompts_apart() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("ex.jsonl");
        let live = LlmGateway::new(
            Arc::new(ScriptedBackend::new(&[(PromptKind::ReverseTranslate, &["one", "two", "three"])])),
            GatewayConfig::default(),
        )
        .unwrap()
        .with_exchange_log(&log)
        .unwrap();
        let p = prompt("same");
        live.complete_in(&p, Some("s1")).unwrap();
        live.complete_in(&p, Some("s2")).unwrap();
        live.complete_in(&p, Some("s1")).unwrap();
        drop(live);

        let replay = LlmGateway::new(Arc::new(ReplayBackend::load(&log).unwrap()), GatewayConfig::default()).unwrap();
        assert_eq!(replay.complete_in(&p, Some("s2")).unwrap(), "two");
        assert_eq!(replay.complete_in(&p, Some("s1")).unwrap(), "one");
        assert_eq!(replay.complete_in(&p, Some("s1")).unwrap(), "three");
        assert_eq!(replay.complete_in(&p, Some("s9")).unwrap(), "one");
    }

    #[test]
    fn tampered_hash_rejected() {
        let line = r#"{"hash":"abc","kind":"explore","request":"q","response":"r","backend":"x","latency_ms":0}"#;
        assert!(parse_exchange_line(line).is_err());
        assert!(ReplayBackend::from_reader(line.as_bytes()).is_err());
    }
}
