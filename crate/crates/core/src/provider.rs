//! Errors shared by every external model or metadata provider.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    /// Transport failure, timeout or server error after retries.
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("not found")]
    NotFound,
    #[error("invalid provider response: {0}")]
    InvalidResponse(String),
}
