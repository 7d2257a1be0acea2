use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use crate::{mock_complete, CompletionResult, CompletionSource, GatewayError, PromptRequest};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay before the second attempt; doubled for each later one.
    pub initial_backoff: Duration,
    pub timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            initial_backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(120),
        }
    }
}

/// Counting semaphore bounding concurrent live requests.
#[derive(Debug)]
struct Permits {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Permits {
    fn acquire(&self) -> PermitGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        PermitGuard(self)
    }
}

struct PermitGuard<'a>(&'a Permits);

impl Drop for PermitGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

/// Client for `<endpoint>/chat/completions`.
#[derive(Debug)]
pub struct LiveClient {
    endpoint: String,
    api_key: Option<String>,
    policy: RetryPolicy,
    agent: ureq::Agent,
    permits: Permits,
}

impl LiveClient {
    pub fn new(endpoint: &str, api_key: Option<String>, policy: RetryPolicy, max_in_flight: usize) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(policy.timeout))
            .build()
            .new_agent();
        LiveClient {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            api_key,
            policy,
            agent,
            permits: Permits { free: Mutex::new(max_in_flight.max(1)), cv: Condvar::new() },
        }
    }

    pub fn complete(&self, request: &PromptRequest) -> Result<CompletionResult, GatewayError> {
        request.validate()?;
        let _permit = self.permits.acquire();
        let start = Instant::now();
        let mut backoff = self.policy.initial_backoff;
        let mut attempt = 1;
        loop {
            match self.attempt(request, attempt) {
                Ok(text) => {
                    return Ok(CompletionResult {
                        text,
                        source: CompletionSource::Live,
                        latency_ms: Some(start.elapsed().as_millis() as u64),
                    })
                }
                Err(e) if e.is_transient() && attempt < self.policy.max_attempts => {
                    thread::sleep(backoff);
                    backoff *= 2;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn attempt(&self, request: &PromptRequest, attempt: u32) -> Result<String, GatewayError> {
        let mut messages = Vec::new();
        if !request.system_text.is_empty() {
            messages.push(json!({"role": "system", "content": request.system_text}));
        }
        messages.push(json!({"role": "user", "content": request.user_text}));
        let mut body = json!({
            "model": request.model_id,
            "messages": messages,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
        });
        if let Some(seed) = request.seed {
            body["seed"] = json!(seed);
        }

        let mut call = self
            .agent
            .post(&format!("{}/chat/completions", self.endpoint))
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = call.send(body.to_string()).map_err(|e| match e {
            ureq::Error::Timeout(_) => GatewayError::Timeout { attempts: attempt },
            other => GatewayError::Network(other.to_string()),
        })?;
        let status = response.status().as_u16();
        let text = response.body_mut().read_to_string().map_err(|e| match e {
            ureq::Error::Timeout(_) => GatewayError::Timeout { attempts: attempt },
            other => GatewayError::Network(other.to_string()),
        })?;
        if !(200..300).contains(&status) {
            return Err(GatewayError::Status { status, body: text });
        }
        let parsed: Value = serde_json::from_str(&text).map_err(|e| GatewayError::Malformed(e.to_string()))?;
        let content = parsed
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| GatewayError::Malformed("missing choices[0].message.content".into()))?;
        if content.trim().is_empty() {
            return Err(GatewayError::EmptyCompletion);
        }
        Ok(content.to_string())
    }
}

#[derive(Debug)]
pub enum Backend {
    Live(LiveClient),
    Mock,
}

impl Backend {
    pub fn complete(&self, request: &PromptRequest) -> Result<CompletionResult, GatewayError> {
        match self {
            Backend::Live(client) => client.complete(request),
            Backend::Mock => {
                request.validate()?;
                Ok(mock_complete(request))
            }
        }
    }
}
