use thiserror::Error;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("network error: {0}")]
    Network(String),
    #[error("request timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("completion text is empty")]
    EmptyCompletion,
    #[error("cache {path} line {line}: {message}")]
    CacheCorrupt { path: String, line: usize, message: String },
    #[error("cache i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl GatewayError {
    /// Failures worth another attempt.
    pub fn is_transient(&self) -> bool {
        match self {
            GatewayError::Status { status, .. } => *status == 429 || (500..600).contains(status),
            GatewayError::Timeout { .. } => true,
            _ => false,
        }
    }
}
