//! Access to an OpenAI-compatible chat-completion endpoint, an offline mock
//! that answers the two description stages deterministically, and a
//! content-addressed cache that makes runs replayable.

mod cache;
mod error;
mod live;
pub mod mock;
pub mod protocol;
mod request;

pub use cache::{cache_key, cached_complete, CacheEntry, ReplayCache, CACHE_FILE_NAME};
pub use error::GatewayError;
pub use live::{Backend, LiveClient, RetryPolicy};
pub use mock::mock_complete;
pub use request::{CompletionResult, CompletionSource, PromptRequest};
