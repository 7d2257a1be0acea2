use serde::{Deserialize, Serialize};

use crate::GatewayError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub system_text: String,
    pub user_text: String,
    pub model_id: String,
    pub max_tokens: u32,
    /// 0 is greedy decoding.
    pub temperature: f64,
    pub seed: Option<u64>,
}

impl PromptRequest {
    /// Greedy request with the given texts.
    pub fn new(system_text: &str, user_text: &str, model_id: &str, max_tokens: u32) -> Result<Self, GatewayError> {
        let r = PromptRequest {
            system_text: system_text.to_string(),
            user_text: user_text.to_string(),
            model_id: model_id.to_string(),
            max_tokens,
            temperature: 0.0,
            seed: None,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.user_text.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("user text is empty".into()));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_tokens must be positive".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(GatewayError::InvalidRequest(format!("temperature {} is invalid", self.temperature)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompletionSource {
    Live,
    Cache,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    pub source: CompletionSource,
    pub latency_ms: Option<u64>,
}
