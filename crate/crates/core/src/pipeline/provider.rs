//! Text and multimodal completion services, real and mock.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use base64::Engine;
use serde::{Deserialize, Serialize};

use super::captioner::ShapeClass;
use crate::embeddings::classify_http;
use crate::error::{Error, Result};
use crate::retry::{Attempt, RetryPolicy};
use crate::synthgen::{DatasetKind, PhysicsCatalog, StockCatalog};
use crate::util::sentence;

pub const LLM_API_KEY_ENV: &str = "TADACAP_LLM_API_KEY";
pub const MM_API_KEY_ENV: &str = "TADACAP_MM_API_KEY";

/// One completion call. `image_b64` is set for multimodal requests only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_b64: Option<String>,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, max_tokens: u32) -> Self {
        Self {
            prompt: prompt.into(),
            temperature: 0.0,
            max_tokens,
            image_b64: None,
        }
    }

    pub fn with_image(prompt: impl Into<String>, image: &[u8], max_tokens: u32) -> Self {
        Self {
            image_b64: Some(base64::engine::general_purpose::STANDARD.encode(image)),
            ..Self::new(prompt, max_tokens)
        }
    }
}

pub trait CompletionService: Send + Sync {
    fn tag(&self) -> &str;
    /// One upstream attempt.
    fn complete(&self, request: &CompletionRequest) -> Result<String, Attempt>;
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    temperature: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    image_b64: Option<&'a str>,
}

#[derive(Deserialize)]
struct WireResponse {
    text: String,
}

/// JSON-over-HTTP completion endpoint with bearer auth.
pub struct HttpCompletionService {
    endpoint: String,
    model: String,
    api_key: String,
    tag: String,
    client: reqwest::blocking::Client,
}

impl HttpCompletionService {
    pub fn new(endpoint: &str, model: &str, api_key: &str, policy: &RetryPolicy) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(policy.timeout)
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(Self {
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            api_key: api_key.to_string(),
            tag: model.to_string(),
            client,
        })
    }
}

impl CompletionService for HttpCompletionService {
    fn tag(&self) -> &str {
        &self.tag
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, Attempt> {
        let body = WireRequest {
            model: &self.model,
            prompt: &request.prompt,
            temperature: request.temperature,
            max_tokens: request.max_tokens,
            image_b64: request.image_b64.as_deref(),
        };
        let resp: WireResponse = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.json())
            .map_err(classify_http)?;
        Ok(resp.text)
    }
}

/// Returns the last prompt line that carries content, without its
/// "Generic:" label: the query caption for in-context prompts, the whole
/// instruction otherwise.
#[derive(Debug, Default)]
pub struct EchoService {
    calls: AtomicUsize,
}

impl EchoService {
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl CompletionService for EchoService {
    fn tag(&self) -> &str {
        "mock:echo"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, Attempt> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let line = request
            .prompt
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && *l != "In-domain:")
            .last()
            .unwrap_or("");
        Ok(line.strip_prefix("Generic:").unwrap_or(line).trim().to_string())
    }
}

/// Returns the same text for every request.
#[derive(Debug)]
pub struct CannedService {
    text: String,
    calls: AtomicUsize,
}

impl CannedService {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Ok(Self::new(std::fs::read_to_string(path)?))
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl CompletionService for CannedService {
    fn tag(&self) -> &str {
        "mock:canned"
    }

    fn complete(&self, _request: &CompletionRequest) -> Result<String, Attempt> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        Ok(self.text.clone())
    }
}

/// Scripted translator: finds known agnostic phrases in the query caption
/// and answers with the first domain phrase of each matching bank.
#[derive(Debug)]
pub struct OracleService {
    /// Lowercase agnostic phrase → domain phrase, longest phrases first.
    table: Vec<(String, String)>,
    calls: AtomicUsize,
}

impl OracleService {
    pub fn new(kind: DatasetKind) -> Self {
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        match kind {
            DatasetKind::Physics => {
                let cat = PhysicsCatalog::bundled();
                let first = |name: &str| cat.get(name).map(|c| c.domain[0].clone());
                for c in &cat.classes {
                    for p in &c.agnostic {
                        map.entry(p.to_lowercase()).or_insert_with(|| c.domain[0].clone());
                    }
                }
                for s in ShapeClass::ALL {
                    if let Some(d) = s.physics_class().and_then(first) {
                        map.insert(s.phrase().to_string(), d);
                    }
                }
            }
            DatasetKind::Stock | DatasetKind::Real => {
                let cat = StockCatalog::bundled();
                let first = |name: &str| cat.get(name).map(|r| r.domain[0].clone());
                for r in &cat.regimes {
                    for p in &r.agnostic {
                        map.entry(p.to_lowercase()).or_insert_with(|| r.domain[0].clone());
                    }
                }
                for s in ShapeClass::ALL {
                    if let Some(d) = first(s.stock_regime()) {
                        map.insert(s.phrase().to_string(), d);
                    }
                }
            }
        }
        let mut table: Vec<(String, String)> = map.into_iter().collect();
        table.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0.cmp(&b.0)));
        Self {
            table,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    /// Domain phrases for the known agnostic phrases in `caption`, in
    /// order of appearance and without repeats.
    pub fn translate(&self, caption: &str) -> String {
        let text = caption.to_lowercase();
        let bytes = text.as_bytes();
        let mut out: Vec<&str> = Vec::new();
        let mut pos = 0;
        while pos < text.len() {
            let at_word = pos == 0 || !bytes[pos - 1].is_ascii_alphanumeric();
            let hit = at_word
                .then(|| {
                    self.table.iter().find(|(p, _)| {
                        text[pos..].starts_with(p.as_str())
                            && text[pos + p.len()..]
                                .chars()
                                .next()
                                .is_none_or(|c| !c.is_alphanumeric())
                    })
                })
                .flatten();
            match hit {
                Some((p, d)) => {
                    if !out.contains(&d.as_str()) {
                        out.push(d);
                    }
                    pos += p.len();
                }
                None => pos += text[pos..].chars().next().map_or(1, char::len_utf8),
            }
        }
        if out.is_empty() {
            return caption.trim().to_string();
        }
        out.iter().map(|d| sentence(d)).collect::<Vec<_>>().join(" ")
    }
}

/// The query caption inside an in-context or zero-shot prompt.
fn query_caption(prompt: &str) -> &str {
    if let Some(i) = prompt.rfind("Generic: ") {
        let rest = &prompt[i + "Generic: ".len()..];
        return rest.lines().next().unwrap_or("");
    }
    if let Some(rest) = prompt.strip_prefix("Translate the time-series description '") {
        if let Some(end) = rest.rfind("' in the context of ") {
            return &rest[..end];
        }
    }
    prompt
}

impl CompletionService for OracleService {
    fn tag(&self) -> &str {
        "mock:oracle"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, Attempt> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        Ok(self.translate(query_caption(&request.prompt)))
    }
}

/// Where completions come from: `mock:echo`, `mock:oracle`,
/// `mock:canned:<path>` or an http(s) URL.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Endpoint {
    Echo,
    Oracle,
    Canned(PathBuf),
    Http(String),
}

impl FromStr for Endpoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mock:echo" => Ok(Endpoint::Echo),
            "mock:oracle" => Ok(Endpoint::Oracle),
            _ if s.starts_with("mock:canned:") => {
                Ok(Endpoint::Canned(PathBuf::from(&s["mock:canned:".len()..])))
            }
            _ if s.starts_with("http://") || s.starts_with("https://") => Ok(Endpoint::Http(s.to_string())),
            _ => Err(Error::Config(format!(
                "unknown endpoint {s:?} (expected mock:echo, mock:oracle, mock:canned:<path> or an http(s) URL)"
            ))),
        }
    }
}

impl TryFrom<String> for Endpoint {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Endpoint> for String {
    fn from(e: Endpoint) -> String {
        e.to_string()
    }
}

impl std::fmt::Display for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Endpoint::Echo => f.write_str("mock:echo"),
            Endpoint::Oracle => f.write_str("mock:oracle"),
            Endpoint::Canned(p) => write!(f, "mock:canned:{}", p.display()),
            Endpoint::Http(u) => f.write_str(u),
        }
    }
}

impl Endpoint {
    pub fn is_mock(&self) -> bool {
        !matches!(self, Endpoint::Http(_))
    }

    /// Builds the service. HTTP endpoints read their key from `key_env` and
    /// fail with a configuration error before any request if it is unset.
    pub fn connect(
        &self,
        model: &str,
        key_env: &str,
        kind: DatasetKind,
        policy: &RetryPolicy,
    ) -> Result<Arc<dyn CompletionService>> {
        Ok(match self {
            Endpoint::Echo => Arc::new(EchoService::default()),
            Endpoint::Oracle => Arc::new(OracleService::new(kind)),
            Endpoint::Canned(p) => Arc::new(CannedService::from_file(p).map_err(|e| {
                Error::Config(format!("canned response file {}: {e}", p.display()))
            })?),
            Endpoint::Http(url) => {
                let key = std::env::var(key_env)
                    .map_err(|_| Error::Config(format!("{key_env} is not set")))?;
                Arc::new(HttpCompletionService::new(url, model, &key, policy)?)
            }
        })
    }
}

/// Cleans raw model output: first paragraph only, no leading "In-domain:"
/// echo, no surrounding quotes, single-line.
pub fn post_process(raw: &str) -> String {
    let trimmed = raw.trim();
    let para = trimmed
        .split("\n\n")
        .map(str::trim)
        .find(|p| !p.is_empty())
        .unwrap_or("");
    let mut text = para;
    for label in ["In-domain:", "in-domain:", "IN-DOMAIN:"] {
        if let Some(rest) = text.strip_prefix(label) {
            text = rest.trim_start();
        }
    }
    let quotes: &[char] = &['"', '\'', '\u{201c}', '\u{201d}', '`'];
    let text = text.trim().trim_matches(quotes).trim();
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}
