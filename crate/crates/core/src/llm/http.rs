//! OpenAI-compatible chat-completions client.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::LlmError;
use crate::llm::{ChatRequest, LlmBackend};

/// Requests issued per call before a short answer is accepted.
const MAX_ROUNDS: usize = 4;

pub struct HttpLlm {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct Body<'a> {
    model: &'a str,
    messages: [Message<'a>; 2],
    temperature: f64,
    n: usize,
    max_tokens: usize,
}

#[derive(Deserialize)]
struct Response {
    #[serde(default)]
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Option<ChoiceMessage>,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

impl HttpLlm {
    /// `endpoint` is the full URL of the chat-completions route.
    pub fn new(endpoint: &str, model: &str, api_key: Option<String>, timeout_secs: u64) -> Result<Self, LlmError> {
        if endpoint.is_empty() {
            return Err(LlmError::Config("endpoint is empty".into()));
        }
        if model.is_empty() {
            return Err(LlmError::Config("model is empty".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(timeout_secs.max(1)))
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(HttpLlm {
            client,
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            api_key,
        })
    }

    fn round(&self, r: &ChatRequest, n: usize) -> Result<Vec<String>, LlmError> {
        let body = Body {
            model: &self.model,
            messages: [
                Message {
                    role: "system",
                    content: &r.system_text,
                },
                Message {
                    role: "user",
                    content: &r.user_text,
                },
            ],
            temperature: r.temperature,
            n,
            max_tokens: r.max_tokens,
        };
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(k) = &self.api_key {
            req = req.bearer_auth(k);
        }
        let resp = req.send().map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| LlmError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(LlmError::Status {
                status: status.as_u16(),
                body: text,
            });
        }
        let parsed: Response =
            serde_json::from_str(&text).map_err(|e| LlmError::Transport(format!("malformed response: {e}")))?;
        Ok(parsed
            .choices
            .into_iter()
            .filter_map(|c| c.message.and_then(|m| m.content))
            .filter(|c| !c.trim().is_empty())
            .collect())
    }
}

impl LlmBackend for HttpLlm {
    fn name(&self) -> &'static str {
        "http"
    }

    /// Servers that ignore `n` are asked again until enough samples arrive.
    fn chat(&self, request: &ChatRequest) -> Result<Vec<String>, LlmError> {
        request.validate()?;
        let mut out = Vec::with_capacity(request.n_samples);
        for _ in 0..MAX_ROUNDS {
            let got = self.round(request, request.n_samples - out.len())?;
            if got.is_empty() {
                break;
            }
            out.extend(got);
            if out.len() >= request.n_samples {
                break;
            }
        }
        out.truncate(request.n_samples);
        if out.is_empty() {
            return Err(LlmError::EmptyCompletion);
        }
        if out.len() < request.n_samples {
            log::warn!("received {} of {} samples", out.len(), request.n_samples);
        }
        Ok(out)
    }
}
