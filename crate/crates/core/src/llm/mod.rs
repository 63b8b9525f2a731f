//! LLM backends, prompt construction and recommendation parsing.

#[cfg(feature = "http")]
mod http;
pub(crate) mod mock;
mod parse;
mod prompt;

use serde::{Deserialize, Serialize};

use crate::error::LlmError;
use crate::registry::Registry;

#[cfg(feature = "http")]
pub use http::HttpLlm;
pub use mock::MockLlm;
pub use parse::{extract_fenced_sql, parse_actions, parse_actions_with, ParsedActions};
pub use prompt::{
    build_prompt, min_index_count, HistoryEntry, PromptDemo, PromptOptions, PromptState, GENERATION_MARKER,
    SYSTEM_INSTRUCTION,
};

/// Sampling temperature used unless configured otherwise.
pub const DEFAULT_TEMPERATURE: f64 = 0.6;
/// Samples drawn per inference unless configured otherwise.
pub const DEFAULT_SAMPLES: usize = 8;
pub const DEFAULT_MAX_TOKENS: usize = 1024;
pub const DEFAULT_TIMEOUT_SECS: u64 = 120;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_text: String,
    pub user_text: String,
    /// Non-negative.
    pub temperature: f64,
    /// At least 1.
    pub n_samples: usize,
    /// Completion length limit.
    pub max_tokens: usize,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), LlmError> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(LlmError::Config(format!(
                "temperature {} is negative",
                self.temperature
            )));
        }
        if self.n_samples == 0 {
            return Err(LlmError::Config("n_samples must be at least 1".into()));
        }
        Ok(())
    }
}

/// A chat-completion endpoint returning `n_samples` completions per request.
pub trait LlmBackend: Send + Sync {
    fn name(&self) -> &'static str;

    fn chat(&self, request: &ChatRequest) -> Result<Vec<String>, LlmError>;
}

/// Construction arguments shared by every LLM backend factory.
#[derive(Debug, Clone, Default)]
pub struct LlmArgs {
    pub seed: u64,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key: Option<String>,
    pub timeout_secs: Option<u64>,
}

pub type LlmRegistry = Registry<dyn LlmBackend, LlmArgs, LlmError>;

/// Registry with `mock` and, when compiled in, `http`.
pub fn llm_registry() -> LlmRegistry {
    let reg = Registry::new("LLM backend").with("mock", |a: &LlmArgs| {
        Ok(Box::new(MockLlm::new(a.seed)) as Box<dyn LlmBackend>)
    });
    #[cfg(feature = "http")]
    let reg = reg.with("http", |a: &LlmArgs| {
        let endpoint = a
            .endpoint
            .clone()
            .ok_or_else(|| LlmError::Config("the http backend needs an endpoint".into()))?;
        let model = a
            .model
            .clone()
            .ok_or_else(|| LlmError::Config("the http backend needs a model name".into()))?;
        Ok(Box::new(HttpLlm::new(
            &endpoint,
            &model,
            a.api_key.clone(),
            a.timeout_secs.unwrap_or(DEFAULT_TIMEOUT_SECS),
        )?) as Box<dyn LlmBackend>)
    });
    reg
}
