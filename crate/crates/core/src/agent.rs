//! Backend-facing data: chat messages, decode parameters and backend specs.
//! Behaviour lives in the engine crate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ContentPart {
    Text { text: String },
    Image { image: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MessageError {
    #[error("a message needs at least one content part")]
    Empty,
    #[error("image parts are only allowed on user messages")]
    ImageOutsideUser,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    role: Role,
    parts: Vec<ContentPart>,
}

impl ChatMessage {
    pub fn new(role: Role, parts: Vec<ContentPart>) -> Result<Self, MessageError> {
        if parts.is_empty() {
            return Err(MessageError::Empty);
        }
        if role != Role::User && parts.iter().any(|p| matches!(p, ContentPart::Image { .. })) {
            return Err(MessageError::ImageOutsideUser);
        }
        Ok(Self { role, parts })
    }

    pub fn system(text: impl Into<String>) -> Self {
        Self { role: Role::System, parts: vec![ContentPart::Text { text: text.into() }] }
    }

    pub fn user(text: impl Into<String>) -> Self {
        Self { role: Role::User, parts: vec![ContentPart::Text { text: text.into() }] }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self { role: Role::Assistant, parts: vec![ContentPart::Text { text: text.into() }] }
    }

    /// User message whose text carries an `<image>` marker: the marker is
    /// replaced by an image part when a reference is given and dropped
    /// otherwise. Without a marker, the image goes first.
    pub fn user_with_image(text: &str, image_ref: Option<&str>) -> Self {
        const MARKER: &str = "<image>";
        let mut parts = Vec::new();
        let push_text = |parts: &mut Vec<ContentPart>, t: &str| {
            let t = t.trim_matches('\n');
            if !t.is_empty() {
                parts.push(ContentPart::Text { text: t.to_string() });
            }
        };
        match text.split_once(MARKER) {
            Some((before, after)) => {
                push_text(&mut parts, before);
                if let Some(img) = image_ref {
                    parts.push(ContentPart::Image { image: img.to_string() });
                }
                push_text(&mut parts, after);
            }
            None => {
                if let Some(img) = image_ref {
                    parts.push(ContentPart::Image { image: img.to_string() });
                }
                push_text(&mut parts, text);
            }
        }
        if parts.is_empty() {
            parts.push(ContentPart::Text { text: String::new() });
        }
        Self { role: Role::User, parts }
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn parts(&self) -> &[ContentPart] {
        &self.parts
    }

    /// Concatenated text parts; images are rendered as `<image:REF>`.
    pub fn text(&self) -> String {
        self.parts
            .iter()
            .map(|p| match p {
                ContentPart::Text { text } => text.clone(),
                ContentPart::Image { image } => format!("<image:{image}>"),
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("n must be at least 1")]
    ZeroSamples,
    #[error("max_new_tokens must be at least 1")]
    ZeroTokens,
    #[error("temperature must be a non-negative finite number")]
    BadTemperature,
    #[error("{0}")]
    Backend(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodeParams {
    pub temperature: f64,
    pub max_new_tokens: u32,
    #[serde(default = "one")]
    pub n: u32,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn one() -> u32 {
    1
}

impl DecodeParams {
    /// Proposal defaults: 512 new tokens.
    pub fn proposal() -> Self {
        Self { temperature: 0.0, max_new_tokens: 512, n: 1, seed: None }
    }

    /// Critic defaults: 768 new tokens.
    pub fn critic() -> Self {
        Self { temperature: 0.0, max_new_tokens: 768, n: 1, seed: None }
    }

    pub fn with_n(mut self, n: u32) -> Self {
        self.n = n;
        self
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if self.n == 0 {
            return Err(ParamError::ZeroSamples);
        }
        if self.max_new_tokens == 0 {
            return Err(ParamError::ZeroTokens);
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(ParamError::BadTemperature);
        }
        Ok(())
    }
}

/// Exponential backoff between HTTP attempts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Backoff {
    pub initial_ms: u64,
    pub factor: f64,
    pub max_ms: u64,
}

impl Default for Backoff {
    fn default() -> Self {
        Self { initial_ms: 500, factor: 2.0, max_ms: 8_000 }
    }
}

impl Backoff {
    /// Delay before retry number `retry` (0-based). Nondecreasing in `retry`.
    pub fn delay_ms(&self, retry: u32) -> u64 {
        let raw = self.initial_ms as f64 * self.factor.max(1.0).powi(retry as i32);
        raw.min(self.max_ms as f64) as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendSpec {
    /// Deterministic script: a path to a JSON script file, or the script
    /// inline.
    Scripted {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        script: Option<serde_json::Value>,
    },
    /// OpenAI-compatible chat-completions service.
    Http {
        base_url: String,
        model: String,
        #[serde(default = "default_timeout")]
        timeout_s: f64,
        #[serde(default = "default_retries")]
        max_retries: u32,
        #[serde(default)]
        backoff: Backoff,
        /// Environment variable holding the bearer token.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        api_key_env: Option<String>,
    },
}

fn default_timeout() -> f64 {
    120.0
}

fn default_retries() -> u32 {
    3
}

impl BackendSpec {
    pub fn validate(&self) -> Result<(), ParamError> {
        match self {
            BackendSpec::Scripted { path, script } => {
                if path.is_none() && script.is_none() {
                    return Err(ParamError::Backend("scripted backend needs `path` or `script`".into()));
                }
            }
            BackendSpec::Http { base_url, timeout_s, .. } => {
                let absolute = base_url.starts_with("http://") || base_url.starts_with("https://");
                if !absolute || base_url.len() <= "https://".len() {
                    return Err(ParamError::Backend(format!("base_url must be absolute: {base_url:?}")));
                }
                if !(timeout_s.is_finite() && *timeout_s > 0.0) {
                    return Err(ParamError::Backend("timeout_s must be positive".into()));
                }
            }
        }
        Ok(())
    }
}
