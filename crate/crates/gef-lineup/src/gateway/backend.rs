//! Backend selection and the OpenAI-compatible HTTP client.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::mock::{mock_chat, MockKind, MockRegistry};
use super::{ChatOutcome, ChatRequest, GatewayError, GatewayResult};

pub enum Backend {
    Http(HttpBackend),
    Mock(MockKind, MockRegistry),
}

impl Backend {
    /// Picks a backend from a model spec. `mock:` schemes select the offline
    /// backends; anything else is treated as a model id served over HTTP at
    /// `endpoint`.
    pub fn from_spec(
        spec: &str,
        endpoint: Option<&str>,
        api_key: Option<String>,
    ) -> GatewayResult<Backend> {
        if let Some(scheme) = spec.strip_prefix("mock:") {
            let kind = match scheme {
                "echo" => MockKind::Echo,
                "oracle" => MockKind::Oracle,
                "uniform" => MockKind::Uniform,
                "calibrated" => MockKind::Calibrated,
                other => {
                    return Err(GatewayError::InvalidRequest(format!(
                        "unknown mock backend mock:{other}"
                    )))
                }
            };
            return Ok(Backend::Mock(kind, MockRegistry::new()));
        }
        let endpoint = endpoint.ok_or_else(|| {
            GatewayError::InvalidRequest(format!("model {spec} needs an API endpoint"))
        })?;
        Ok(Backend::Http(HttpBackend::new(endpoint, api_key)?))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Backend::Http(_) => "http",
            Backend::Mock(MockKind::Echo, _) => "mock:echo",
            Backend::Mock(MockKind::Oracle, _) => "mock:oracle",
            Backend::Mock(MockKind::Uniform, _) => "mock:uniform",
            Backend::Mock(MockKind::Calibrated, _) => "mock:calibrated",
        }
    }

    pub fn supports_logprobs(&self) -> bool {
        !matches!(self, Backend::Mock(MockKind::Echo, _))
    }

    /// The registry of the domain-aware mocks, if this backend has one.
    pub fn registry(&self) -> Option<&MockRegistry> {
        match self {
            Backend::Mock(MockKind::Oracle, r) | Backend::Mock(MockKind::Calibrated, r) => Some(r),
            _ => None,
        }
    }

    pub fn chat(&self, req: &ChatRequest) -> GatewayResult<ChatOutcome> {
        match self {
            Backend::Http(http) => http.chat(req),
            Backend::Mock(kind, registry) => mock_chat(*kind, registry, req),
        }
    }
}

pub struct HttpBackend {
    url: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(endpoint: &str, api_key: Option<String>) -> GatewayResult<HttpBackend> {
        let base = endpoint.trim_end_matches('/');
        let url = if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| GatewayError::Transport {
                message: e.to_string(),
                retryable: false,
            })?;
        Ok(HttpBackend {
            url,
            api_key,
            client,
        })
    }

    pub fn chat(&self, req: &ChatRequest) -> GatewayResult<ChatOutcome> {
        let mut body = json!({
            "model": req.model_id,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        if req.want_logprobs {
            body["logprobs"] = json!(true);
            body["top_logprobs"] = json!(req.top_k_logprobs);
        }
        let mut call = self.client.post(&self.url).json(&body);
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let resp = call.send().map_err(|e| GatewayError::Transport {
            message: e.to_string(),
            retryable: true,
        })?;
        let status = resp.status();
        let text = resp.text().map_err(|e| GatewayError::Transport {
            message: e.to_string(),
            retryable: true,
        })?;
        match status.as_u16() {
            200..=299 => parse_chat_response(&text, req.want_logprobs),
            401 | 403 => Err(GatewayError::Auth(snippet(&text))),
            429 => Err(GatewayError::Quota(snippet(&text))),
            s => Err(GatewayError::Transport {
                message: format!("HTTP {s}: {}", snippet(&text)),
                retryable: s >= 500,
            }),
        }
    }
}

fn snippet(text: &str) -> String {
    let t = text.trim();
    if t.len() > 200 {
        format!("{}...", &t[..200])
    } else {
        t.to_string()
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
    logprobs: Option<Logprobs>,
}

#[derive(Deserialize)]
struct Message {
    content: String,
}

#[derive(Deserialize)]
struct Logprobs {
    content: Vec<TokenLogprob>,
}

#[derive(Deserialize)]
struct TokenLogprob {
    token: String,
    top_logprobs: Vec<Candidate>,
}

#[derive(Deserialize)]
struct Candidate {
    token: String,
    logprob: f64,
}

fn parse_chat_response(text: &str, want_logprobs: bool) -> GatewayResult<ChatOutcome> {
    let parsed: ChatResponse = serde_json::from_str(text).map_err(|e| GatewayError::Transport {
        message: format!("bad response body: {e}"),
        retryable: false,
    })?;
    let choice = parsed
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| GatewayError::Transport {
            message: "response had no choices".into(),
            retryable: false,
        })?;
    let (first_token, top_logprobs) = match choice.logprobs.and_then(|l| l.content.into_iter().next()) {
        Some(first) => (
            Some(first.token),
            Some(
                first
                    .top_logprobs
                    .into_iter()
                    .map(|c| (c.token, c.logprob))
                    .collect::<Vec<_>>(),
            ),
        ),
        None if want_logprobs => {
            return Err(GatewayError::Capability {
                backend: "http".into(),
                feature: "first-token logprobs".into(),
            })
        }
        None => (None, None),
    };
    Ok(ChatOutcome {
        text: choice.message.content,
        first_token,
        top_logprobs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    fn serve_once(status: &'static str, body: &'static str) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = [0u8; 8192];
            let _ = stream.read(&mut buf);
            let resp = format!(
                "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(resp.as_bytes()).unwrap();
        });
        format!("http://{addr}/v1")
    }

    #[test]
    fn parses_completion_with_logprobs() {
        let body = r#"{"choices":[{"message":{"content":"Yes"},"logprobs":{"content":[{"token":"Yes","top_logprobs":[{"token":"Yes","logprob":-0.1},{"token":"No","logprob":-2.4}]}]}}]}"#;
        let url = serve_once("200 OK", body);
        let backend = HttpBackend::new(&url, Some("k".into())).unwrap();
        let mut req = ChatRequest::new("m", "p".into());
        req.want_logprobs = true;
        let out = backend.chat(&req).unwrap();
        assert_eq!(out.text, "Yes");
        assert_eq!(out.first_token.as_deref(), Some("Yes"));
        assert_eq!(out.top_logprobs.unwrap().len(), 2);
    }

    #[test]
    fn auth_failure_is_not_transport() {
        let url = serve_once("401 Unauthorized", r#"{"error":"bad key"}"#);
        let backend = HttpBackend::new(&url, None).unwrap();
        let err = backend.chat(&ChatRequest::new("m", "p".into())).unwrap_err();
        assert!(matches!(err, GatewayError::Auth(_)));
    }

    #[test]
    fn quota_maps_to_quota_error() {
        let url = serve_once("429 Too Many Requests", "slow down");
        let backend = HttpBackend::new(&url, None).unwrap();
        let err = backend.chat(&ChatRequest::new("m", "p".into())).unwrap_err();
        assert!(matches!(err, GatewayError::Quota(_)));
    }

    #[test]
    fn server_error_is_retryable_transport() {
        let url = serve_once("503 Service Unavailable", "down");
        let backend = HttpBackend::new(&url, None).unwrap();
        let err = backend.chat(&ChatRequest::new("m", "p".into())).unwrap_err();
        match err {
            GatewayError::Transport { retryable, .. } => assert!(retryable),
            other => panic!("wanted transport, got {other:?}"),
        }
    }

    #[test]
    fn missing_logprobs_is_a_capability_error() {
        let body = r#"{"choices":[{"message":{"content":"Yes"},"logprobs":null}]}"#;
        let url = serve_once("200 OK", body);
        let backend = HttpBackend::new(&url, None).unwrap();
        let mut req = ChatRequest::new("m", "p".into());
        req.want_logprobs = true;
        let err = backend.chat(&req).unwrap_err();
        assert!(matches!(err, GatewayError::Capability { .. }));
    }

    #[test]
    fn unknown_mock_scheme_rejected() {
        assert!(Backend::from_spec("mock:nope", None, None).is_err());
        assert!(Backend::from_spec("gpt-4o", None, None).is_err());
        assert!(Backend::from_spec("mock:echo", None, None).is_ok());
    }
}
