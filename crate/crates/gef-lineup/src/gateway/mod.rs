//! LLM access: one blocking chat-completions client, offline mock backends,
//! a persistent response cache, and the first-token yes probe.

mod backend;
mod cache;
pub mod mock;
mod prompt;

pub use backend::{Backend, HttpBackend};
pub use cache::Cache;
pub use mock::{digest16, MockKind, MockRegistry};
pub use prompt::{
    render_prompt, PromptKind, PromptSlots, ESSAY_MATCH_TEMPLATE, FEEDBACK_MATCH_TEMPLATE,
    GEC_TEMPLATE, GEF_NO_GEC_TEMPLATE, GEF_WITH_GEC_100_TEMPLATE, GEF_WITH_GEC_TEMPLATE,
};

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("transport failure: {message}")]
    Transport { message: String, retryable: bool },
    #[error("authentication rejected: {0}")]
    Auth(String),
    #[error("quota exhausted: {0}")]
    Quota(String),
    #[error("backend {backend} does not support {feature}")]
    Capability { backend: String, feature: String },
    #[error("prompt slot {slot} missing for {kind:?}")]
    MissingSlot {
        kind: PromptKind,
        slot: &'static str,
    },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("cache failure: {0}")]
    Cache(String),
}

pub type GatewayResult<T> = Result<T, GatewayError>;

/// One chat call: a single user message plus decoding parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub want_logprobs: bool,
    pub top_k_logprobs: u8,
}

impl ChatRequest {
    pub fn new(model_id: &str, prompt: String) -> ChatRequest {
        ChatRequest {
            model_id: model_id.to_string(),
            prompt,
            temperature: 0.0,
            max_tokens: 1024,
            want_logprobs: false,
            top_k_logprobs: 20,
        }
    }

    fn validate(&self) -> GatewayResult<()> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} out of [0, 2]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_tokens must be positive".into()));
        }
        if !(1..=20).contains(&self.top_k_logprobs) {
            return Err(GatewayError::InvalidRequest(format!(
                "top_k_logprobs {} out of [1, 20]",
                self.top_k_logprobs
            )));
        }
        Ok(())
    }

    /// Cache key: digest of the model id, prompt and decoding parameters.
    pub fn cache_key(&self) -> String {
        let canonical = serde_json::to_string(self).expect("request serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// What a chat call produced: the text, and when logprobs were requested,
/// the generated first token with its top-k alternatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatOutcome {
    pub text: String,
    pub first_token: Option<String>,
    pub top_logprobs: Option<Vec<(String, f64)>>,
}

/// First-token yes/no reading of a probe answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YesProbe {
    pub p_yes: f64,
    pub p_no: f64,
    pub first_token: String,
    /// True when no yes or no variant appeared in the top-k candidates.
    pub fallback: bool,
}

fn yes_no_class(token: &str) -> Option<bool> {
    let trimmed = token.trim_matches(|c: char| c.is_whitespace() || c.is_ascii_punctuation());
    let folded = trimmed.to_lowercase();
    match folded.as_str() {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> RetryPolicy {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(250),
            max_delay: Duration::from_secs(4),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> RetryPolicy {
        RetryPolicy {
            max_retries: 0,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
        }
    }
}

/// A model behind a cache: completions and yes probes go through here.
pub struct Gateway {
    backend: Backend,
    model_id: String,
    cache: Arc<Cache>,
    retry: RetryPolicy,
    backend_calls: AtomicU64,
}

impl Gateway {
    pub fn new(backend: Backend, model_id: &str, cache: Arc<Cache>) -> Gateway {
        Gateway {
            backend,
            model_id: model_id.to_string(),
            cache,
            retry: RetryPolicy::default(),
            backend_calls: AtomicU64::new(0),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Gateway {
        self.retry = retry;
        self
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    /// How many requests actually reached the backend (cache misses).
    pub fn backend_calls(&self) -> u64 {
        self.backend_calls.load(Ordering::Relaxed)
    }

    /// Runs a request through the cache, dispatching on a miss with capped
    /// exponential backoff on retryable transport failures.
    pub fn complete_request(&self, req: &ChatRequest) -> GatewayResult<ChatOutcome> {
        req.validate()?;
        if req.want_logprobs && !self.backend.supports_logprobs() {
            return Err(GatewayError::Capability {
                backend: self.backend.name().into(),
                feature: "first-token logprobs".into(),
            });
        }
        let key = req.cache_key();
        if let Some(hit) = self.cache.get(&key) {
            return Ok(hit);
        }
        let out = self.dispatch(req)?;
        self.cache.put(&key, &req.model_id, &out)?;
        Ok(out)
    }

    fn dispatch(&self, req: &ChatRequest) -> GatewayResult<ChatOutcome> {
        let mut delay = self.retry.base_delay;
        let mut attempt = 0;
        loop {
            self.backend_calls.fetch_add(1, Ordering::Relaxed);
            match self.backend.chat(req) {
                Ok(out) => return Ok(out),
                Err(GatewayError::Transport { message, retryable })
                    if retryable && attempt < self.retry.max_retries =>
                {
                    let _ = message;
                    std::thread::sleep(delay);
                    delay = (delay * 2).min(self.retry.max_delay);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Fills and runs a plain completion.
    pub fn complete(&self, prompt: &str) -> GatewayResult<String> {
        let req = ChatRequest::new(&self.model_id, prompt.to_string());
        Ok(self.complete_request(&req)?.text)
    }

    /// Asks a yes/no question and reads the first-token distribution:
    /// p_yes and p_no sum the probability of every top-k candidate whose
    /// case-folded, punctuation-stripped form is "yes" or "no".
    pub fn probe_yes(&self, prompt: &str) -> GatewayResult<YesProbe> {
        let mut req = ChatRequest::new(&self.model_id, prompt.to_string());
        req.max_tokens = 8;
        req.want_logprobs = true;
        let out = self.complete_request(&req)?;
        let top = out.top_logprobs.ok_or_else(|| GatewayError::Capability {
            backend: self.backend.name().into(),
            feature: "first-token logprobs".into(),
        })?;
        let mut p_yes = 0.0;
        let mut p_no = 0.0;
        let mut saw_any = false;
        for (token, logprob) in &top {
            match yes_no_class(token) {
                Some(true) => {
                    p_yes += logprob.exp();
                    saw_any = true;
                }
                Some(false) => {
                    p_no += logprob.exp();
                    saw_any = true;
                }
                None => {}
            }
        }
        let total = p_yes + p_no;
        if total > 1.0 {
            p_yes /= total;
            p_no /= total;
        }
        Ok(YesProbe {
            p_yes,
            p_no,
            first_token: out.first_token.unwrap_or_default(),
            fallback: !saw_any,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mock_gateway(spec: &str) -> Gateway {
        let backend = Backend::from_spec(spec, None, None).unwrap();
        Gateway::new(backend, spec, Arc::new(Cache::in_memory()))
    }

    #[test]
    fn cache_key_tracks_decoding_params() {
        let a = ChatRequest::new("m", "p".into());
        let mut b = a.clone();
        assert_eq!(a.cache_key(), b.cache_key());
        b.temperature = 0.7;
        assert_ne!(a.cache_key(), b.cache_key());
        let mut c = a.clone();
        c.model_id = "other".into();
        assert_ne!(a.cache_key(), c.cache_key());
        let mut d = a.clone();
        d.want_logprobs = true;
        assert_ne!(a.cache_key(), d.cache_key());
    }

    #[test]
    fn completions_hit_the_cache() {
        let gw = mock_gateway("mock:echo");
        let first = gw.complete("hello").unwrap();
        let second = gw.complete("hello").unwrap();
        assert_eq!(first, second);
        assert_eq!(gw.backend_calls(), 1);
        gw.complete("different").unwrap();
        assert_eq!(gw.backend_calls(), 2);
    }

    #[test]
    fn echo_cannot_probe() {
        let gw = mock_gateway("mock:echo");
        let err = gw.probe_yes("anything").unwrap_err();
        assert!(matches!(err, GatewayError::Capability { .. }));
        assert_eq!(gw.backend_calls(), 0);
    }

    #[test]
    fn uniform_probe_reads_half() {
        let gw = mock_gateway("mock:uniform");
        let prompt = render_prompt(
            PromptKind::EssayMatch,
            &PromptSlots {
                essay: Some("an essay ."),
                feedback: Some("some feedback"),
                ..Default::default()
            },
        )
        .unwrap();
        let probe = gw.probe_yes(&prompt).unwrap();
        assert!((probe.p_yes - 0.5).abs() < 1e-9);
        assert!((probe.p_no - 0.5).abs() < 1e-9);
        assert!(!probe.fallback);
    }

    #[test]
    fn non_answer_sets_fallback() {
        let gw = mock_gateway("mock:uniform");
        let probe = gw.probe_yes("not a probe prompt").unwrap();
        assert!(probe.fallback);
        assert_eq!(probe.p_yes, 0.0);
        assert_eq!(probe.p_no, 0.0);
    }

    #[test]
    fn yes_variants_fold_together() {
        assert_eq!(yes_no_class(" Yes"), Some(true));
        assert_eq!(yes_no_class("YES."), Some(true));
        assert_eq!(yes_no_class("yes,"), Some(true));
        assert_eq!(yes_no_class("No"), Some(false));
        assert_eq!(yes_no_class("\"no\""), Some(false));
        assert_eq!(yes_no_class("maybe"), None);
        assert_eq!(yes_no_class("yesterday"), None);
    }

    #[test]
    fn invalid_requests_are_rejected() {
        let gw = mock_gateway("mock:echo");
        let mut req = ChatRequest::new("mock:echo", "p".into());
        req.top_k_logprobs = 0;
        assert!(matches!(
            gw.complete_request(&req),
            Err(GatewayError::InvalidRequest(_))
        ));
        let mut req = ChatRequest::new("mock:echo", "p".into());
        req.temperature = -1.0;
        assert!(matches!(
            gw.complete_request(&req),
            Err(GatewayError::InvalidRequest(_))
        ));
    }

    #[test]
    fn probe_results_come_from_cache_on_repeat() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let prompt = render_prompt(
            PromptKind::EssayMatch,
            &PromptSlots {
                essay: Some("one essay ."),
                feedback: Some("Dear learner, mock:0123456789abcdef."),
                ..Default::default()
            },
        )
        .unwrap();
        let first = {
            let backend = Backend::from_spec("mock:oracle", None, None).unwrap();
            let gw = Gateway::new(backend, "mock:oracle", Arc::new(Cache::open(&path).unwrap()));
            let probe = gw.probe_yes(&prompt).unwrap();
            assert_eq!(gw.backend_calls(), 1);
            probe
        };
        let backend = Backend::from_spec("mock:oracle", None, None).unwrap();
        let gw = Gateway::new(backend, "mock:oracle", Arc::new(Cache::open(&path).unwrap()));
        let second = gw.probe_yes(&prompt).unwrap();
        assert_eq!(gw.backend_calls(), 0);
        assert_eq!(first, second);
    }
}
