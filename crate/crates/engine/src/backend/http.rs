use std::path::Path;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use base64::Engine as _;
use pcr_core::{BackendSpec, Backoff, ChatMessage, ContentPart, DecodeParams};
use serde_json::{json, Value};

use super::{check_request, BackendError, Generator};

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(n: usize) -> Self {
        Self { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().expect("semaphore lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("semaphore wait");
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("semaphore lock") += 1;
        self.0.cv.notify_one();
    }
}

enum Failure {
    Timeout,
    Status(u16, String),
    Transport(String),
}

/// Client for an OpenAI-compatible `/v1/chat/completions` endpoint.
#[derive(Debug)]
pub struct HttpBackend {
    url: String,
    model: String,
    max_retries: u32,
    backoff: Backoff,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    permits: Semaphore,
}

impl HttpBackend {
    /// `workers` is the maximum number of concurrent requests.
    pub fn new(spec: &BackendSpec, workers: usize) -> Result<Self, BackendError> {
        spec.validate().map_err(|e| BackendError::InvalidRequest(e.to_string()))?;
        let BackendSpec::Http { base_url, model, timeout_s, max_retries, backoff, api_key_env } = spec else {
            return Err(BackendError::InvalidRequest("not an HTTP backend spec".into()));
        };
        let api_key = match api_key_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| BackendError::InvalidRequest(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(*timeout_s))
            .build()
            .map_err(|e| BackendError::Transport { attempts: 0, message: e.to_string() })?;
        Ok(Self {
            url: format!("{}/v1/chat/completions", base_url.trim_end_matches('/')),
            model: model.clone(),
            max_retries: *max_retries,
            backoff: backoff.clone(),
            api_key,
            client,
            permits: Semaphore::new(workers),
        })
    }

    fn payload(&self, messages: &[Value], params: &DecodeParams, n: u32) -> Value {
        let mut body = json!({
            "model": self.model,
            "messages": messages,
            "temperature": params.temperature,
            "max_tokens": params.max_new_tokens,
            "n": n,
        });
        if let Some(seed) = params.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    fn attempt(&self, body: &str) -> Result<Value, Failure> {
        let _permit = self.permits.acquire();
        let mut req = self.client.post(&self.url).header("content-type", "application/json").body(body.to_string());
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(classify)?;
        let status = resp.status().as_u16();
        let text = resp.text().map_err(classify)?;
        if !(200..300).contains(&status) {
            return Err(Failure::Status(status, text));
        }
        serde_json::from_str(&text).map_err(|e| Failure::Transport(format!("response is not JSON: {e}")))
    }

    /// One logical request with retries. Non-retryable statuses return at once.
    fn post(&self, body: &Value) -> Result<Value, BackendError> {
        let body = body.to_string();
        let mut attempts = 0;
        loop {
            attempts += 1;
            let failure = match self.attempt(&body) {
                Ok(v) => return Ok(v),
                Err(f) => f,
            };
            let retryable = match &failure {
                Failure::Status(code, _) => matches!(code, 408 | 429 | 500..=599),
                _ => true,
            };
            if !retryable || attempts > self.max_retries {
                return Err(match failure {
                    Failure::Timeout => BackendError::Timeout { attempts },
                    Failure::Status(code, body) => BackendError::HttpStatus { code, attempts, body },
                    Failure::Transport(message) => BackendError::Transport { attempts, message },
                });
            }
            let delay = self.backoff.delay_ms(attempts - 1);
            log::warn!("attempt {attempts} failed, retrying in {delay} ms");
            std::thread::sleep(Duration::from_millis(delay));
        }
    }

    fn request(&self, messages: &[Value], params: &DecodeParams, n: u32) -> Result<Vec<String>, BackendError> {
        let resp = self.post(&self.payload(messages, params, n))?;
        contents(&resp)
    }
}

fn classify(e: reqwest::Error) -> Failure {
    if e.is_timeout() {
        Failure::Timeout
    } else {
        Failure::Transport(e.to_string())
    }
}

fn contents(resp: &Value) -> Result<Vec<String>, BackendError> {
    let choices = resp
        .get("choices")
        .and_then(Value::as_array)
        .ok_or_else(|| BackendError::MalformedResponse("missing `choices` array".into()))?;
    choices
        .iter()
        .map(|c| {
            c.pointer("/message/content")
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| BackendError::MalformedResponse("choice without message.content".into()))
        })
        .collect()
}

fn mime_for(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("gif") => "image/gif",
        Some("webp") => "image/webp",
        Some("bmp") => "image/bmp",
        _ => "application/octet-stream",
    }
}

/// URLs and data URIs pass through; anything else is read as a local file
/// and inlined.
pub(crate) fn image_url(reference: &str) -> Result<String, BackendError> {
    if ["http://", "https://", "data:"].iter().any(|p| reference.starts_with(p)) {
        return Ok(reference.to_string());
    }
    let path = Path::new(reference);
    let bytes = std::fs::read(path).map_err(|e| BackendError::InvalidRequest(format!("image {reference}: {e}")))?;
    let encoded = base64::engine::general_purpose::STANDARD.encode(bytes);
    Ok(format!("data:{};base64,{encoded}", mime_for(path)))
}

/// Wire form of one message: plain string content when text-only, a parts
/// array as soon as an image is present.
pub(crate) fn wire_message(m: &ChatMessage) -> Result<Value, BackendError> {
    let has_image = m.parts().iter().any(|p| matches!(p, ContentPart::Image { .. }));
    let content = if has_image {
        let parts = m
            .parts()
            .iter()
            .map(|p| match p {
                ContentPart::Text { text } => Ok(json!({"type": "text", "text": text})),
                ContentPart::Image { image } => {
                    Ok(json!({"type": "image_url", "image_url": {"url": image_url(image)?}}))
                }
            })
            .collect::<Result<Vec<_>, BackendError>>()?;
        Value::Array(parts)
    } else {
        Value::String(m.text())
    };
    Ok(json!({"role": m.role().as_str(), "content": content}))
}

impl Generator for HttpBackend {
    fn generate(&self, messages: &[ChatMessage], params: &DecodeParams) -> Result<Vec<String>, BackendError> {
        check_request(messages, params)?;
        let wire = messages.iter().map(wire_message).collect::<Result<Vec<_>, _>>()?;
        let n = params.n;
        if n == 1 {
            let mut out = self.request(&wire, params, 1)?;
            out.truncate(1);
            return if out.len() == 1 { Ok(out) } else { Err(BackendError::MalformedResponse("no choices".into())) };
        }
        match self.request(&wire, params, n) {
            Ok(out) if out.len() >= n as usize => return Ok(out.into_iter().take(n as usize).collect()),
            Ok(out) => log::info!("service returned {} of {n} choices; falling back to single requests", out.len()),
            Err(BackendError::HttpStatus { code: 400 | 422, .. }) => {
                log::info!("service rejected n={n}; falling back to single requests")
            }
            Err(e) => return Err(e),
        }
        // Fallback: n single-choice requests, bounded by the semaphore.
        let results: Vec<Result<Vec<String>, BackendError>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..n)
                .map(|i| {
                    let wire = &wire;
                    let mut p = params.clone().with_n(1);
                    p.seed = params.seed.map(|seed| seed.wrapping_add(u64::from(i)));
                    s.spawn(move || self.request(wire, &p, 1))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("request thread panicked")).collect()
        });
        let mut out = Vec::with_capacity(n as usize);
        for r in results {
            let first = r?.into_iter().next().ok_or_else(|| BackendError::MalformedResponse("no choices".into()))?;
            out.push(first);
        }
        Ok(out)
    }
}
