use std::time::{Duration, SystemTime};

use log::{debug, warn};
use serde::Deserialize;
use serde_json::json;

use super::{IngestError, PromptPair, RawTokenDistribution, TokenProb};

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "DISTELECT_API_KEY";

const MAX_BACKOFF: Duration = Duration::from_secs(30);

#[derive(Clone)]
pub struct EndpointConfig {
    /// Base URL up to, not including, `/chat/completions`.
    pub base_url: String,
    pub model: String,
    /// Number of alternatives requested for the first output position.
    pub top_k: u32,
    pub temperature: f64,
    pub timeout: Duration,
    pub max_retries: u32,
    /// Delay before the first retry; doubles on each further retry.
    pub backoff_base: Duration,
    /// Maximum concurrent in-flight requests.
    pub parallel: usize,
    pub api_key: String,
}

impl std::fmt::Debug for EndpointConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EndpointConfig")
            .field("base_url", &self.base_url)
            .field("model", &self.model)
            .field("top_k", &self.top_k)
            .field("temperature", &self.temperature)
            .field("timeout", &self.timeout)
            .field("max_retries", &self.max_retries)
            .field("backoff_base", &self.backoff_base)
            .field("parallel", &self.parallel)
            .field("api_key", &"<redacted>")
            .finish()
    }
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>, api_key: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            model: model.into(),
            top_k: 20,
            temperature: 1.0,
            timeout: Duration::from_secs(60),
            max_retries: 3,
            backoff_base: Duration::from_millis(500),
            parallel: 4,
            api_key: api_key.into(),
        }
    }

    /// Defaults with the API key read from [`API_KEY_ENV`].
    pub fn from_env(base_url: impl Into<String>, model: impl Into<String>) -> Result<Self, IngestError> {
        match std::env::var(API_KEY_ENV) {
            Ok(key) if !key.is_empty() => Ok(Self::new(base_url, model, key)),
            _ => Err(IngestError::MissingApiKey),
        }
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.base_url.trim().is_empty() {
            return Err(IngestError::Config("base_url is empty".into()));
        }
        if self.model.trim().is_empty() {
            return Err(IngestError::Config("model is empty".into()));
        }
        if self.top_k < 1 {
            return Err(IngestError::Config("top_k must be at least 1".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(IngestError::Config(format!(
                "temperature {} must be a finite non-negative number",
                self.temperature
            )));
        }
        if self.parallel < 1 {
            return Err(IngestError::Config("parallel must be at least 1".into()));
        }
        if self.api_key.is_empty() {
            return Err(IngestError::MissingApiKey);
        }
        Ok(())
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }

    fn backoff(&self, retry: u32) -> Duration {
        self.backoff_base
            .checked_mul(1u32 << retry.min(16))
            .unwrap_or(MAX_BACKOFF)
            .min(MAX_BACKOFF)
    }
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    logprobs: Option<ChoiceLogprobs>,
}

#[derive(Deserialize)]
struct ChoiceLogprobs {
    content: Option<Vec<PositionLogprobs>>,
}

#[derive(Deserialize)]
struct PositionLogprobs {
    top_logprobs: Vec<TopLogprob>,
}

#[derive(Deserialize)]
struct TopLogprob {
    token: String,
    logprob: f64,
}

enum Attempt {
    Done(Result<RawTokenDistribution, IngestError>),
    Retry(String),
}

/// Blocking chat-completions client that reads first-position logprobs.
///
/// Cheap to share across threads.
#[derive(Debug, Clone)]
pub struct ChatClient {
    http: reqwest::blocking::Client,
    cfg: EndpointConfig,
}

impl ChatClient {
    pub fn new(cfg: EndpointConfig) -> Result<Self, IngestError> {
        cfg.validate()?;
        let http = reqwest::blocking::Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| IngestError::Config(e.to_string()))?;
        Ok(ChatClient { http, cfg })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.cfg
    }

    /// One chat-completion request, retried with exponential backoff on
    /// transport failures, HTTP 429 and 5xx.
    pub fn fetch(&self, prompt: &PromptPair) -> Result<RawTokenDistribution, IngestError> {
        let body = json!({
            "model": self.cfg.model,
            "messages": [
                { "role": "system", "content": prompt.system_text },
                { "role": "user", "content": prompt.user_text },
            ],
            "max_tokens": 1,
            "temperature": self.cfg.temperature,
            "logprobs": true,
            "top_logprobs": self.cfg.top_k,
        });
        let url = self.cfg.endpoint();
        let attempts = self.cfg.max_retries + 1;
        let mut last_failure = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.cfg.backoff(attempt - 1);
                warn!("retrying {url} in {delay:?} after: {last_failure}");
                std::thread::sleep(delay);
            }
            match self.attempt(&url, &body) {
                Attempt::Done(result) => return result,
                Attempt::Retry(message) => last_failure = message,
            }
        }
        Err(IngestError::Network {
            attempts,
            message: last_failure,
        })
    }

    fn attempt(&self, url: &str, body: &serde_json::Value) -> Attempt {
        debug!("POST {url}");
        let response = match self
            .http
            .post(url)
            .bearer_auth(&self.cfg.api_key)
            .json(body)
            .send()
        {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = response.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Attempt::Done(Err(IngestError::Auth {
                status: status.as_u16(),
            }));
        }
        if status.as_u16() == 429 || status.is_server_error() {
            return Attempt::Retry(format!("HTTP {status}"));
        }
        let text = match response.text() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        if !status.is_success() {
            return Attempt::Done(Err(IngestError::Http {
                status: status.as_u16(),
                body: text,
            }));
        }
        Attempt::Done(parse_response(&text, &self.cfg.model))
    }
}

fn parse_response(text: &str, model: &str) -> Result<RawTokenDistribution, IngestError> {
    let parsed: CompletionResponse =
        serde_json::from_str(text).map_err(|e| IngestError::MalformedResponse(e.to_string()))?;
    let position = parsed
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| IngestError::MalformedResponse("no choices".into()))?
        .logprobs
        .and_then(|l| l.content)
        .and_then(|c| c.into_iter().next())
        .ok_or_else(|| IngestError::MalformedResponse("no logprobs for the first position".into()))?;
    let mut entries = Vec::with_capacity(position.top_logprobs.len());
    for top in position.top_logprobs {
        if top.logprob.is_nan() || top.logprob > 0.0 {
            return Err(IngestError::MalformedResponse(format!(
                "logprob {} for token {:?}",
                top.logprob, top.token
            )));
        }
        entries.push(TokenProb {
            token: top.token,
            probability: top.logprob.exp(),
        });
    }
    RawTokenDistribution::new(entries, model, SystemTime::now())
        .map_err(|e| IngestError::MalformedResponse(e.to_string()))
}

/// Single-shot helper around [`ChatClient::fetch`].
pub fn fetch_token_distribution(
    cfg: &EndpointConfig,
    prompt: &PromptPair,
) -> Result<RawTokenDistribution, IngestError> {
    ChatClient::new(cfg.clone())?.fetch(prompt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_openai_shape() {
        let body = r#"{"choices":[{"index":0,"message":{"role":"assistant","content":"52"},
            "logprobs":{"content":[{"token":"52","logprob":-0.35667494393873245,
            "top_logprobs":[{"token":" 52","logprob":-0.35667494393873245},
                            {"token":"53","logprob":-1.6094379124341003}]}]}}]}"#;
        let raw = parse_response(body, "m").unwrap();
        assert_eq!(raw.entries().len(), 2);
        assert_eq!(raw.entries()[0].token, " 52");
        assert!((raw.entries()[0].probability - 0.7).abs() < 1e-12);
        assert!((raw.entries()[1].probability - 0.2).abs() < 1e-12);
    }

    #[test]
    fn missing_logprobs_is_malformed() {
        for body in [
            r#"{"choices":[{"message":{"content":"52"}}]}"#,
            r#"{"choices":[{"logprobs":{"content":[]}}]}"#,
            r#"{"choices":[{"logprobs":null}]}"#,
            r#"{"choices":[]}"#,
            r#"not json"#,
        ] {
            assert!(
                matches!(parse_response(body, "m"), Err(IngestError::MalformedResponse(_))),
                "{body}"
            );
        }
        let positive = r#"{"choices":[{"logprobs":{"content":[{"top_logprobs":[{"token":"1","logprob":0.5}]}]}}]}"#;
        assert!(matches!(parse_response(positive, "m"), Err(IngestError::MalformedResponse(_))));
    }

    #[test]
    fn config_validation_and_backoff() {
        let mut cfg = EndpointConfig::new("http://localhost", "m", "k");
        assert!(cfg.validate().is_ok());
        cfg.top_k = 0;
        assert!(cfg.validate().is_err());
        cfg.top_k = 5;
        cfg.temperature = -1.0;
        assert!(cfg.validate().is_err());
        cfg.temperature = 0.0;
        cfg.api_key.clear();
        assert!(matches!(cfg.validate(), Err(IngestError::MissingApiKey)));

        let cfg = EndpointConfig::new("http://localhost/", "m", "k");
        assert_eq!(cfg.endpoint(), "http://localhost/chat/completions");
        assert_eq!(cfg.backoff(0), Duration::from_millis(500));
        assert_eq!(cfg.backoff(2), Duration::from_millis(2000));
        assert_eq!(cfg.backoff(40), MAX_BACKOFF);
        assert!(!format!("{cfg:?}").contains("\"k\""));
    }
}
