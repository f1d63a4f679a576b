//! LLM backends: a deterministic mock for tests and an HTTP client.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use base64::Engine;
use serde_json::{json, Value};
use thiserror::Error;

use crate::episode::BoundingBox;
use crate::seed::fnv1a;

/// Environment variable holding the API key for [`HttpBackend`].
pub const API_KEY_ENV: &str = "ODYSSEY_LLM_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Contextual,
    ScreenRationale,
    LowLevel,
    Rewrite,
    JudgeCompletion,
    JudgeEquivalence,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Contextual => "contextual",
            Stage::ScreenRationale => "screen-rationale",
            Stage::LowLevel => "low-level",
            Stage::Rewrite => "rewrite",
            Stage::JudgeCompletion => "judge-completion",
            Stage::JudgeEquivalence => "judge-equivalence",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `(episode_id, t, stage)`. Retries of one request reuse its key, so a
/// backend can deduplicate them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IdempotencyKey {
    pub episode_id: String,
    pub t: u32,
    pub stage: Stage,
}

impl fmt::Display for IdempotencyKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.episode_id, self.t, self.stage)
    }
}

/// How a bounding box reaches the model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum OverlayMode {
    /// Box corners written into the prompt; the overlay attachment is the
    /// plain screenshot flagged with the box.
    #[default]
    Text,
    /// A copy of the screenshot with the box drawn on it (needs the
    /// `overlay` feature and a decodable image).
    Image,
}

impl OverlayMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            OverlayMode::Text => "text",
            OverlayMode::Image => "image",
        }
    }
}

/// One image sent with a request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageAttachment {
    /// File to send.
    pub path: PathBuf,
    /// Set on the bounding-box overlay attachment.
    pub overlay: Option<BoundingBox>,
    /// How the overlay was produced, when there is one.
    pub overlay_mode: Option<OverlayMode>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LlmRequest {
    pub key: IdempotencyKey,
    pub system: String,
    pub user: String,
    pub images: Vec<ImageAttachment>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LlmError {
    /// Worth retrying.
    #[error("LLM transport error: {0}")]
    Transport(String),
    #[error("LLM request rejected: {0}")]
    Rejected(String),
}

pub trait LlmBackend: Send + Sync {
    fn complete(&self, req: &LlmRequest) -> Result<String, LlmError>;
}

/// Retries transport errors up to `retries` extra times.
pub fn complete_with_retry(backend: &dyn LlmBackend, req: &LlmRequest, retries: u32) -> Result<String, LlmError> {
    let mut attempt = 0;
    loop {
        match backend.complete(req) {
            Err(LlmError::Transport(msg)) if attempt < retries => {
                attempt += 1;
                log::warn!("{}: {msg}; retry {attempt}/{retries}", req.key);
            }
            other => return other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RewriteMode {
    Identity,
    Prefix(String),
}

/// Deterministic backend. Replies are derived from the request only, every
/// call is logged in order, and chosen keys can be made to fail.
#[derive(Debug)]
pub struct MockBackend {
    pub rewrite: RewriteMode,
    /// Judges answer YES unless this is false.
    pub approve: bool,
    fail_on: BTreeSet<(String, u32, Stage)>,
    log: Mutex<Vec<IdempotencyKey>>,
    /// Copy of every request, for prompt inspection.
    requests: Mutex<Vec<LlmRequest>>,
}

impl Default for MockBackend {
    fn default() -> Self {
        Self {
            rewrite: RewriteMode::Identity,
            approve: true,
            fail_on: BTreeSet::new(),
            log: Mutex::new(Vec::new()),
            requests: Mutex::new(Vec::new()),
        }
    }
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_rewrite(mut self, mode: RewriteMode) -> Self {
        self.rewrite = mode;
        self
    }

    pub fn disapproving(mut self) -> Self {
        self.approve = false;
        self
    }

    /// Every request with this key fails with a transport error.
    pub fn fail_on(mut self, episode_id: &str, t: u32, stage: Stage) -> Self {
        self.fail_on.insert((episode_id.to_string(), t, stage));
        self
    }

    pub fn calls(&self) -> Vec<IdempotencyKey> {
        self.log.lock().expect("mock log").clone()
    }

    pub fn requests(&self) -> Vec<LlmRequest> {
        self.requests.lock().expect("mock requests").clone()
    }

    fn line_after<'a>(text: &'a str, label: &str) -> &'a str {
        text.lines()
            .find_map(|l| l.strip_prefix(label))
            .map(str::trim)
            .unwrap_or("")
    }
}

impl LlmBackend for MockBackend {
    fn complete(&self, req: &LlmRequest) -> Result<String, LlmError> {
        self.log.lock().expect("mock log").push(req.key.clone());
        self.requests.lock().expect("mock requests").push(req.clone());
        let k = &req.key;
        if self.fail_on.contains(&(k.episode_id.clone(), k.t, k.stage)) {
            return Err(LlmError::Transport(format!("injected failure at {k}")));
        }
        let digest = fnv1a(&[req.system.as_bytes(), req.user.as_bytes()]) & 0xffff_ffff;
        let action = Self::line_after(&req.user, "Action taken:");
        let kind = action.split('(').next().unwrap_or("");
        let verdict = if self.approve { "YES" } else { "NO" };
        Ok(match k.stage {
            Stage::Contextual => format!("Progress before step {} [{digest:08x}].", k.t),
            Stage::ScreenRationale => format!(
                "SCREEN: Screen at step {} with {} attachment(s) [{digest:08x}].\nRATIONALE: {action} moves the task forward.",
                k.t,
                req.images.len()
            ),
            Stage::LowLevel => format!("Perform {kind} at step {} [{digest:08x}].", k.t),
            Stage::Rewrite => {
                let original = Self::line_after(&req.user, "Request:");
                match &self.rewrite {
                    RewriteMode::Identity => original.to_string(),
                    RewriteMode::Prefix(p) => format!("{p}{original}"),
                }
            }
            Stage::JudgeCompletion | Stage::JudgeEquivalence => format!("{verdict}\nmock judgment"),
        })
    }
}

/// Token bucket shared by all callers of a backend.
#[derive(Debug)]
pub struct RateLimiter {
    per_minute: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    pub fn per_minute(requests: u32) -> Self {
        let cap = f64::from(requests.max(1));
        Self {
            per_minute: cap,
            state: Mutex::new((cap, Instant::now())),
        }
    }

    /// Blocks until a request may be sent.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut s = self.state.lock().expect("rate limiter");
                let now = Instant::now();
                let refill = now.duration_since(s.1).as_secs_f64() * self.per_minute / 60.0;
                s.0 = (s.0 + refill).min(self.per_minute);
                s.1 = now;
                if s.0 >= 1.0 {
                    s.0 -= 1.0;
                    return;
                }
                (1.0 - s.0) * 60.0 / self.per_minute
            };
            thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

pub const DEFAULT_REQUESTS_PER_MINUTE: u32 = 30;

/// Chat-style HTTP backend. The body is
/// `{model, temperature, messages: [{role, content: [{type: "text"|"image", ...}]}]}`
/// with images inlined as base64 at `"detail": "high"`. The reply text is
/// read from `choices[0].message.content`, `content[0].text` or `text`.
pub struct HttpBackend {
    url: String,
    model: String,
    key: Option<String>,
    http: ureq::Agent,
    limiter: RateLimiter,
}

impl HttpBackend {
    pub fn new(url: impl Into<String>, model: impl Into<String>, timeout: Duration, requests_per_minute: u32) -> Self {
        let http = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            url: url.into(),
            model: model.into(),
            key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            http,
            limiter: RateLimiter::per_minute(requests_per_minute),
        }
    }

    pub fn body(&self, req: &LlmRequest) -> Result<Value, LlmError> {
        let mut content = vec![json!({"type": "text", "text": req.user})];
        for img in &req.images {
            let bytes = fs::read(&img.path)
                .map_err(|e| LlmError::Rejected(format!("{}: {e}", img.path.display())))?;
            let mut part = json!({
                "type": "image",
                "detail": "high",
                "data": base64::engine::general_purpose::STANDARD.encode(bytes),
            });
            if let (Some(b), Some(mode)) = (&img.overlay, img.overlay_mode) {
                part["overlay"] = json!({"bbox": b, "mode": mode.as_str()});
            }
            content.push(part);
        }
        Ok(json!({
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": [{"type": "text", "text": req.system}]},
                {"role": "user", "content": content},
            ],
        }))
    }
}

fn reply_text(v: &Value) -> Option<String> {
    v.pointer("/choices/0/message/content")
        .or_else(|| v.pointer("/content/0/text"))
        .or_else(|| v.get("text"))
        .and_then(Value::as_str)
        .map(str::to_string)
}

impl LlmBackend for HttpBackend {
    fn complete(&self, req: &LlmRequest) -> Result<String, LlmError> {
        let body = serde_json::to_string(&self.body(req)?).expect("body serializes");
        self.limiter.acquire();
        let mut call = self
            .http
            .post(&self.url)
            .header("content-type", "application/json")
            .header("idempotency-key", req.key.to_string());
        if let Some(key) = &self.key {
            call = call.header("authorization", format!("Bearer {key}"));
        }
        let mut resp = call.send(body.as_str()).map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(LlmError::Transport(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(LlmError::Rejected(format!("HTTP {status}: {}", text.trim())));
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| LlmError::Rejected(format!("reply is not JSON: {e}")))?;
        reply_text(&v).ok_or_else(|| LlmError::Rejected("reply has no text".into()))
    }
}
