//! Provider chat APIs behind [`ChatBackend`].

pub mod format;
pub mod limiter;
pub mod retry;

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use self::limiter::RateLimiter;
use self::retry::{retry, Attempt, Clock, RetryFailure, RetryPolicy, SystemClock};
use super::{BackendError, ChatBackend, ChatRequest, ChatResponse, EngineFamily, EngineId};

pub use format::{render_claude_prompt, render_j2_prompt};

#[derive(Debug, Clone, PartialEq)]
pub struct HttpRequest {
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: Value,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Sends one JSON POST. Errors are connection-level failures only; HTTP
/// error statuses come back as responses.
pub trait Transport: Send + Sync {
    fn post_json(&self, request: &HttpRequest) -> Result<HttpResponse, String>;
}

/// Blocking HTTP transport that counts every request it attempts.
pub struct HttpTransport {
    agent: ureq::Agent,
    attempts: AtomicUsize,
}

impl Default for HttpTransport {
    fn default() -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(std::time::Duration::from_secs(120)))
            .build()
            .new_agent();
        HttpTransport {
            agent,
            attempts: AtomicUsize::new(0),
        }
    }
}

impl HttpTransport {
    pub fn attempts(&self) -> usize {
        self.attempts.load(Ordering::SeqCst)
    }
}

impl Transport for HttpTransport {
    fn post_json(&self, request: &HttpRequest) -> Result<HttpResponse, String> {
        self.attempts.fetch_add(1, Ordering::SeqCst);
        let mut builder = self.agent.post(&request.url);
        for (k, v) in &request.headers {
            builder = builder.header(k.as_str(), v.as_str());
        }
        let mut response = builder.send_json(&request.body).map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, body })
    }
}

/// Refuses every request. Used when the harness runs offline.
#[derive(Debug, Default)]
pub struct OfflineTransport;

impl Transport for OfflineTransport {
    fn post_json(&self, request: &HttpRequest) -> Result<HttpResponse, String> {
        Err(format!("offline: refusing request to {}", request.url))
    }
}

pub fn default_base_url(family: EngineFamily) -> Option<&'static str> {
    match family {
        EngineFamily::Gpt => Some("https://api.openai.com"),
        EngineFamily::Claude => Some("https://api.anthropic.com"),
        EngineFamily::Cohere => Some("https://api.cohere.ai"),
        EngineFamily::J2 => Some("https://api.ai21.com"),
        _ => None,
    }
}

/// Shared state for building remote backends: endpoints, keys, one
/// limiter per provider, one transport.
pub struct RemoteSettings {
    pub base_urls: HashMap<EngineFamily, String>,
    pub api_keys: HashMap<EngineFamily, String>,
    pub requests_per_minute: u32,
    pub retry: RetryPolicy,
    pub transport: Arc<dyn Transport>,
    pub clock: Arc<dyn Clock>,
    limiters: Mutex<HashMap<EngineFamily, Arc<RateLimiter>>>,
}

impl Default for RemoteSettings {
    fn default() -> Self {
        RemoteSettings {
            base_urls: HashMap::new(),
            api_keys: HashMap::new(),
            requests_per_minute: 60,
            retry: RetryPolicy::default(),
            transport: Arc::new(HttpTransport::default()),
            clock: Arc::new(SystemClock::default()),
            limiters: Mutex::new(HashMap::new()),
        }
    }
}

impl RemoteSettings {
    /// Reads each provider's key from its environment variable.
    pub fn with_env_keys(mut self) -> Self {
        for family in [
            EngineFamily::Gpt,
            EngineFamily::Claude,
            EngineFamily::Cohere,
            EngineFamily::J2,
        ] {
            if let Some(key) = family
                .api_key_var()
                .and_then(|var| std::env::var(var).ok())
                .filter(|k| !k.trim().is_empty())
            {
                self.api_keys.insert(family, key);
            }
        }
        self
    }

    pub fn base_url(&self, family: EngineFamily) -> Option<String> {
        self.base_urls
            .get(&family)
            .cloned()
            .or_else(|| default_base_url(family).map(str::to_string))
    }

    /// Fails if the engine is not remote or its key is missing.
    pub fn check(&self, engine: &EngineId) -> Result<(), BackendError> {
        let family = engine.family;
        if !family.is_remote() {
            return Err(BackendError::Config(format!("{engine} is not a remote engine")));
        }
        if !self.api_keys.contains_key(&family) {
            return Err(BackendError::Config(format!(
                "missing API key for {engine}: set {}",
                family.api_key_var().unwrap_or("the provider key")
            )));
        }
        Ok(())
    }

    pub fn limiter(&self, family: EngineFamily) -> Arc<RateLimiter> {
        let mut map = self.limiters.lock().expect("limiter map poisoned");
        map.entry(family)
            .or_insert_with(|| Arc::new(RateLimiter::new(self.requests_per_minute, self.clock.clone())))
            .clone()
    }

    pub fn backend(&self, engine: &EngineId, jitter_seed: u64) -> Result<RemoteBackend, BackendError> {
        self.check(engine)?;
        Ok(RemoteBackend {
            engine: engine.clone(),
            base_url: self.base_url(engine.family).unwrap_or_default(),
            api_key: self.api_keys[&engine.family].clone(),
            retry: self.retry,
            transport: self.transport.clone(),
            clock: self.clock.clone(),
            limiter: self.limiter(engine.family),
            jitter: Mutex::new(ChaCha8Rng::seed_from_u64(jitter_seed)),
        })
    }
}

pub struct RemoteBackend {
    engine: EngineId,
    base_url: String,
    api_key: String,
    retry: RetryPolicy,
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
    limiter: Arc<RateLimiter>,
    jitter: Mutex<ChaCha8Rng>,
}

impl RemoteBackend {
    pub fn engine(&self) -> &EngineId {
        &self.engine
    }
}

fn is_transient(status: u16) -> bool {
    status == 408 || status == 429 || status >= 500
}

impl ChatBackend for RemoteBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        if request.messages.is_empty() {
            return Err(BackendError::Precondition("empty message list".into()));
        }
        let family = self.engine.family;
        let provider = family.name();
        let wire = format::wire_request(family, &self.engine.model_name, &self.api_key, request)?;
        let http = HttpRequest {
            url: format!("{}{}", self.base_url.trim_end_matches('/'), wire.path),
            headers: wire.headers,
            body: wire.body,
        };
        let mut rng = self.jitter.lock().expect("jitter rng poisoned");
        let outcome = retry(&self.retry, self.clock.as_ref(), &mut *rng, |_| {
            self.limiter.acquire();
            match self.transport.post_json(&http) {
                Err(e) => Attempt::Transient(BackendError::Unavailable(e)),
                Ok(r) if (200..300).contains(&r.status) => Attempt::Done(r.body),
                Ok(r) if is_transient(r.status) => {
                    Attempt::Transient(BackendError::Unavailable(format!("status {}: {}", r.status, r.body)))
                }
                Ok(r) => Attempt::Fatal(BackendError::Status {
                    provider,
                    status: r.status,
                    body: r.body,
                }),
            }
        });
        let body = match outcome {
            Ok(body) => body,
            Err(RetryFailure::Fatal(e)) => return Err(e),
            Err(RetryFailure::Exhausted { attempts, last }) => {
                return Err(BackendError::Exhausted {
                    provider,
                    attempts,
                    detail: last.to_string(),
                })
            }
        };
        let json: Value = serde_json::from_str(&body)
            .map_err(|e| BackendError::Malformed(format!("{e}: {body}")))?;
        Ok(ChatResponse::new(format::response_text(family, &json)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::ChatMessage;
    use retry::FakeClock;

    struct Scripted {
        replies: Mutex<Vec<Result<HttpResponse, String>>>,
        seen: Mutex<Vec<HttpRequest>>,
    }

    impl Transport for Scripted {
        fn post_json(&self, request: &HttpRequest) -> Result<HttpResponse, String> {
            self.seen.lock().unwrap().push(request.clone());
            self.replies.lock().unwrap().remove(0)
        }
    }

    fn settings(replies: Vec<Result<HttpResponse, String>>) -> (RemoteSettings, Arc<Scripted>, Arc<FakeClock>) {
        let transport = Arc::new(Scripted {
            replies: Mutex::new(replies),
            seen: Mutex::new(Vec::new()),
        });
        let clock = Arc::new(FakeClock::default());
        let mut s = RemoteSettings {
            transport: transport.clone(),
            clock: clock.clone(),
            ..RemoteSettings::default()
        };
        s.api_keys.insert(EngineFamily::Gpt, "k".into());
        s.base_urls.insert(EngineFamily::Gpt, "http://stub/".into());
        (s, transport, clock)
    }

    fn req() -> ChatRequest {
        ChatRequest {
            system_prompt: "sys".into(),
            messages: vec![ChatMessage::user("hi")],
            temperature: 1.0,
        }
    }

    fn ok(text: &str) -> Result<HttpResponse, String> {
        Ok(HttpResponse {
            status: 200,
            body: serde_json::json!({"choices": [{"message": {"content": text}}]}).to_string(),
        })
    }

    #[test]
    fn retries_transient_then_succeeds() {
        let busy = Ok(HttpResponse { status: 503, body: "busy".into() });
        let (s, t, clock) = settings(vec![busy, Err("reset".into()), ok("done")]);
        let b = s.backend(&EngineId::gpt35(), 1).unwrap();
        assert_eq!(b.complete(&req()).unwrap().text, "done");
        assert_eq!(t.seen.lock().unwrap().len(), 3);
        assert_eq!(t.seen.lock().unwrap()[0].url, "http://stub/v1/chat/completions");
        assert_eq!(clock.sleeps().len(), 2);
    }

    #[test]
    fn exhaustion_reports_status_detail() {
        let replies = (0..5)
            .map(|_| Ok(HttpResponse { status: 429, body: "slow down".into() }))
            .collect();
        let (s, t, _) = settings(replies);
        let err = s.backend(&EngineId::gpt35(), 1).unwrap().complete(&req()).unwrap_err();
        match err {
            BackendError::Exhausted { attempts, detail, .. } => {
                assert_eq!(attempts, 5);
                assert!(detail.contains("429"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(t.seen.lock().unwrap().len(), 5);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let (s, t, _) = settings(vec![Ok(HttpResponse { status: 401, body: "nope".into() })]);
        let err = s.backend(&EngineId::gpt35(), 1).unwrap().complete(&req()).unwrap_err();
        assert!(matches!(err, BackendError::Status { status: 401, .. }));
        assert_eq!(t.seen.lock().unwrap().len(), 1);
    }

    #[test]
    fn missing_key_and_empty_request_never_touch_the_network() {
        let (s, t, _) = settings(vec![]);
        let claude: EngineId = "claude-v1.3".parse().unwrap();
        assert!(matches!(s.backend(&claude, 0), Err(BackendError::Config(_))));
        let b = s.backend(&EngineId::gpt35(), 0).unwrap();
        let empty = ChatRequest { messages: vec![], ..req() };
        assert!(matches!(b.complete(&empty), Err(BackendError::Precondition(_))));
        assert!(t.seen.lock().unwrap().is_empty());
    }
}
