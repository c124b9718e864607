use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::prompt::prompt_digest;

pub const ENV_ENDPOINT: &str = "OEA_LLM_ENDPOINT";
pub const ENV_MODEL: &str = "OEA_LLM_MODEL";
pub const ENV_KEY: &str = "OEA_LLM_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Stub,
    Replay,
    RemoteHttp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub backend: BackendKind,
    pub model_name: String,
    pub temperature: f64,
    pub penalty: f64,
    pub max_retries: u32,
    /// First retry delay; doubles on each further attempt.
    pub retry_base_ms: u64,
    /// Minimum wall-clock gap between repeated runs (remote backend only).
    pub run_spacing_secs: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Stub,
            model_name: "stub".to_owned(),
            temperature: 0.0,
            penalty: 0.0,
            max_retries: 3,
            retry_base_ms: 500,
            run_spacing_secs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("temperature must be a non-negative number")]
    Temperature,
    #[error("penalty must be a finite number")]
    Penalty,
    #[error("run spacing must be a non-negative number of seconds")]
    RunSpacing,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(ConfigError::Temperature);
        }
        if !self.penalty.is_finite() {
            return Err(ConfigError::Penalty);
        }
        if let Some(s) = self.run_spacing_secs {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(ConfigError::RunSpacing);
            }
        }
        Ok(())
    }

    pub fn run_spacing(&self) -> Option<Duration> {
        self.run_spacing_secs.map(Duration::from_secs_f64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[serde(tag = "kind", content = "message", rename_all = "snake_case")]
pub enum BackendError {
    /// Network or server-side failure; retried.
    #[error("transport error: {0}")]
    Transport(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("no recorded completion for prompt digest {0}")]
    MissingFixture(String),
    #[error("unexpected response: {0}")]
    BadResponse(String),
}

impl BackendError {
    pub fn is_transient(&self) -> bool {
        matches!(self, BackendError::Transport(_))
    }
}

/// Produces a completion for a prompt.
pub trait Backend: Send + Sync {
    fn complete(&self, prompt: &str, cfg: &ModelConfig, run_index: u32) -> Result<String, BackendError>;
}

type StubFn = dyn Fn(&str, u32) -> Result<String, BackendError> + Send + Sync;

/// In-process backend for tests and offline runs.
pub struct StubBackend {
    f: Box<StubFn>,
}

impl StubBackend {
    pub fn fixed(text: impl Into<String>) -> Self {
        let text = text.into();
        Self::from_fn(move |_, _| Ok(text.clone()))
    }

    /// Completions looked up by prompt digest; unknown prompts get `fallback`.
    pub fn scripted(by_digest: BTreeMap<String, String>, fallback: impl Into<String>) -> Self {
        let fallback = fallback.into();
        Self::from_fn(move |prompt, _| {
            Ok(by_digest
                .get(&prompt_digest(prompt))
                .cloned()
                .unwrap_or_else(|| fallback.clone()))
        })
    }

    pub fn from_fn(f: impl Fn(&str, u32) -> Result<String, BackendError> + Send + Sync + 'static) -> Self {
        Self { f: Box::new(f) }
    }
}

impl Backend for StubBackend {
    fn complete(&self, prompt: &str, _cfg: &ModelConfig, run_index: u32) -> Result<String, BackendError> {
        (self.f)(prompt, run_index)
    }
}

/// Recorded completions: `<digest>.txt`, or `<digest>.<run>.txt` for a
/// run-specific recording.
pub struct ReplayBackend {
    dir: PathBuf,
}

impl ReplayBackend {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, BackendError> {
        let dir = dir.into();
        if !dir.is_dir() {
            return Err(BackendError::Unavailable(format!(
                "replay directory {} does not exist",
                dir.display()
            )));
        }
        Ok(Self { dir })
    }

    pub fn fixture_path(dir: &Path, digest: &str) -> PathBuf {
        dir.join(format!("{digest}.txt"))
    }
}

impl Backend for ReplayBackend {
    fn complete(&self, prompt: &str, _cfg: &ModelConfig, run_index: u32) -> Result<String, BackendError> {
        let digest = prompt_digest(prompt);
        let specific = self.dir.join(format!("{digest}.{run_index}.txt"));
        let path = if specific.is_file() {
            specific
        } else {
            Self::fixture_path(&self.dir, &digest)
        };
        match fs::read_to_string(&path) {
            Ok(text) => Ok(text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(BackendError::MissingFixture(digest)),
            Err(e) => Err(BackendError::Unavailable(format!("{}: {e}", path.display()))),
        }
    }
}

/// OpenAI-style chat-completion endpoint.
pub struct RemoteHttpBackend {
    endpoint: String,
    model: String,
    key: String,
    agent: ureq::Agent,
}

impl RemoteHttpBackend {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, key: impl Into<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(300)))
            .build()
            .into();
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            key: key.into(),
            agent,
        }
    }

    /// Read endpoint, model and key from the environment. A model name in
    /// `cfg` overrides the environment's.
    pub fn from_env() -> Result<Self, BackendError> {
        let get = |name: &str| {
            std::env::var(name)
                .ok()
                .filter(|v| !v.trim().is_empty())
                .ok_or_else(|| BackendError::Unavailable(format!("environment variable {name} is not set")))
        };
        Ok(Self::new(get(ENV_ENDPOINT)?, get(ENV_MODEL)?, get(ENV_KEY)?))
    }

    pub fn model(&self) -> &str {
        &self.model
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: Option<String>,
}

impl Backend for RemoteHttpBackend {
    fn complete(&self, prompt: &str, cfg: &ModelConfig, _run_index: u32) -> Result<String, BackendError> {
        let model = if cfg.model_name.is_empty() || cfg.backend != BackendKind::RemoteHttp {
            &self.model
        } else {
            &cfg.model_name
        };
        let body = serde_json::json!({
            "model": model,
            "messages": [{ "role": "user", "content": prompt }],
            "temperature": cfg.temperature,
            "frequency_penalty": cfg.penalty,
            "presence_penalty": cfg.penalty,
        });
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", format!("Bearer {}", self.key))
            .header("api-key", &self.key)
            .send_json(&body)
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        match status {
            200..=299 => {}
            401 | 403 => return Err(BackendError::Auth(format!("HTTP {status}"))),
            408 | 429 | 500..=599 => return Err(BackendError::Transport(format!("HTTP {status}"))),
            _ => return Err(BackendError::BadResponse(format!("HTTP {status}: {text}"))),
        }
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| BackendError::BadResponse(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::BadResponse("no completion in response".to_owned()))
    }
}

/// Build the backend selected by `cfg`. `replay_dir` is required for replay.
pub fn backend_for(cfg: &ModelConfig, replay_dir: Option<&Path>) -> Result<Arc<dyn Backend>, BackendError> {
    match cfg.backend {
        BackendKind::Stub => Ok(Arc::new(StubBackend::fixed("Answer: Yes"))),
        BackendKind::Replay => {
            let dir = replay_dir.ok_or_else(|| BackendError::Unavailable("replay backend needs a fixture directory".to_owned()))?;
            Ok(Arc::new(ReplayBackend::new(dir)?))
        }
        BackendKind::RemoteHttp => Ok(Arc::new(RemoteHttpBackend::from_env()?)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct CacheKey {
    model: String,
    digest: String,
    run_index: u32,
}

/// Content-addressed completion cache keyed by (model, prompt digest, run).
///
/// Concurrent requests for the same key are serialized, so the backend is
/// called at most once per key. With a directory attached, entries persist as
/// `<dir>/<model>/<digest>.<run>.txt`.
#[derive(Default)]
pub struct CompletionCache {
    entries: Mutex<HashMap<CacheKey, Arc<Mutex<Option<String>>>>>,
    dir: Option<PathBuf>,
}

impl CompletionCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn persistent(dir: impl Into<PathBuf>) -> Self {
        Self {
            entries: Mutex::default(),
            dir: Some(dir.into()),
        }
    }

    fn disk_path(&self, key: &CacheKey) -> Option<PathBuf> {
        let safe_model: String = key
            .model
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' || c == '_' { c } else { '_' })
            .collect();
        self.dir
            .as_ref()
            .map(|d| d.join(safe_model).join(format!("{}.{}.txt", key.digest, key.run_index)))
    }

    /// Return the cached completion or compute it; the flag is true on a hit.
    pub fn get_or_insert_with(
        &self,
        model: &str,
        digest: &str,
        run_index: u32,
        compute: impl FnOnce() -> Result<String, BackendError>,
    ) -> Result<(String, bool), BackendError> {
        let key = CacheKey {
            model: model.to_owned(),
            digest: digest.to_owned(),
            run_index,
        };
        let slot = {
            let mut map = self.entries.lock().expect("cache lock");
            map.entry(key.clone()).or_default().clone()
        };
        let mut guard = slot.lock().expect("cache slot lock");
        if let Some(text) = guard.as_ref() {
            return Ok((text.clone(), true));
        }
        let path = self.disk_path(&key);
        if let Some(text) = path.as_ref().and_then(|p| fs::read_to_string(p).ok()) {
            *guard = Some(text.clone());
            return Ok((text, true));
        }
        let text = compute()?;
        if let Some(p) = path {
            if let Some(parent) = p.parent() {
                let _ = fs::create_dir_all(parent);
            }
            let _ = fs::write(&p, &text);
        }
        *guard = Some(text.clone());
        Ok((text, false))
    }

    pub fn len(&self) -> usize {
        self.entries
            .lock()
            .expect("cache lock")
            .values()
            .filter(|s| s.lock().map(|g| g.is_some()).unwrap_or(false))
            .count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Send `prompt` to `backend`, going through `cache` and retrying transient
/// failures with exponential backoff. Returns the completion and whether it
/// came from the cache.
pub fn request_judgment(
    prompt: &str,
    cfg: &ModelConfig,
    backend: &dyn Backend,
    cache: &CompletionCache,
    run_index: u32,
) -> Result<(String, bool), BackendError> {
    let digest = prompt_digest(prompt);
    cache.get_or_insert_with(&cfg.model_name, &digest, run_index, || {
        let mut attempt = 0;
        loop {
            match backend.complete(prompt, cfg, run_index) {
                Err(e) if e.is_transient() && attempt < cfg.max_retries => {
                    let delay = cfg.retry_base_ms.saturating_mul(1u64 << attempt.min(16));
                    std::thread::sleep(Duration::from_millis(delay));
                    attempt += 1;
                }
                other => return other,
            }
        }
    })
}
