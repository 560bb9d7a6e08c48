//! Text-generation backends.
//!
//! Everything that talks to a model goes through [`Generator`]. Two
//! implementations ship: [`ScriptedBackend`] replays canned completions for
//! tests and offline runs, [`HttpBackend`] speaks the OpenAI-compatible
//! chat-completions protocol.

mod http;
mod scripted;

use std::path::Path;
use std::sync::Arc;

use pcr_core::{BackendSpec, ChatMessage, DecodeParams};
use thiserror::Error;

pub use http::HttpBackend;
pub use scripted::{request_key, ScriptedBackend};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("HTTP status {code} after {attempts} attempt(s): {body}")]
    HttpStatus { code: u16, attempts: u32, body: String },
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("script has no response left for request {key}")]
    ScriptExhausted { key: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("bad script: {0}")]
    BadScript(String),
}

/// A shareable handle that turns a conversation into `params.n` completions.
pub trait Generator: Send + Sync {
    fn generate(&self, messages: &[ChatMessage], params: &DecodeParams) -> Result<Vec<String>, BackendError>;
}

impl<G: Generator + ?Sized> Generator for Arc<G> {
    fn generate(&self, messages: &[ChatMessage], params: &DecodeParams) -> Result<Vec<String>, BackendError> {
        (**self).generate(messages, params)
    }
}

pub(crate) fn check_request(messages: &[ChatMessage], params: &DecodeParams) -> Result<(), BackendError> {
    if messages.is_empty() {
        return Err(BackendError::InvalidRequest("no messages".into()));
    }
    params.validate().map_err(|e| BackendError::InvalidRequest(e.to_string()))
}

/// Builds a backend from its spec. `workers` bounds concurrent HTTP requests;
/// relative script paths resolve against `base_dir`.
pub fn build_backend(
    spec: &BackendSpec,
    workers: usize,
    base_dir: Option<&Path>,
) -> Result<Arc<dyn Generator>, BackendError> {
    spec.validate().map_err(|e| BackendError::InvalidRequest(e.to_string()))?;
    match spec {
        BackendSpec::Scripted { path, script } => {
            let value = match (script, path) {
                (Some(v), _) => v.clone(),
                (None, Some(p)) => {
                    let p = match base_dir {
                        Some(dir) if Path::new(p).is_relative() => dir.join(p),
                        _ => p.into(),
                    };
                    let text = std::fs::read_to_string(&p)
                        .map_err(|e| BackendError::BadScript(format!("{}: {e}", p.display())))?;
                    serde_json::from_str(&text).map_err(|e| BackendError::BadScript(format!("{}: {e}", p.display())))?
                }
                (None, None) => unreachable!("validated"),
            };
            Ok(Arc::new(ScriptedBackend::from_value(&value)?))
        }
        BackendSpec::Http { .. } => Ok(Arc::new(HttpBackend::new(spec, workers)?)),
    }
}
