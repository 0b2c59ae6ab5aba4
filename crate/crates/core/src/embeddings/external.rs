//! Service-backed embeddings with a content-addressed cache.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use base64::Engine;
use parking_lot::RwLock;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{l2_normalize, EmbeddingVector};
use crate::error::{Error, Result};
use crate::retry::{Attempt, RetryPolicy};
use crate::util::sha256_hex;

pub const EMBED_API_KEY_ENV: &str = "TADACAP_EMBED_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayloadKind {
    Image,
    Series,
}

/// Wire body of an embedding request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub id: String,
    pub payload_b64: String,
    pub kind: PayloadKind,
}

impl EmbedRequest {
    pub fn new(id: &str, payload: &[u8], kind: PayloadKind) -> Self {
        Self {
            id: id.to_string(),
            payload_b64: base64::engine::general_purpose::STANDARD.encode(payload),
            kind,
        }
    }
}

#[derive(Debug, Deserialize)]
struct EmbedResponse {
    vector: Vec<f64>,
    dim: usize,
}

pub trait EmbeddingService: Send + Sync {
    fn provider_tag(&self) -> &str;
    /// One upstream attempt. Transport-level failures should be `Retry`.
    fn embed(&self, request: &EmbedRequest) -> Result<Vec<f64>, Attempt>;
}

pub struct HttpEmbeddingService {
    endpoint: String,
    api_key: String,
    tag: String,
    client: reqwest::blocking::Client,
}

impl HttpEmbeddingService {
    pub fn new(
        endpoint: impl Into<String>,
        api_key: impl Into<String>,
        tag: impl Into<String>,
        policy: &RetryPolicy,
    ) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(policy.timeout)
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(Self {
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            tag: tag.into(),
            client,
        })
    }

    /// Reads the API key from `TADACAP_EMBED_API_KEY`.
    pub fn from_env(endpoint: &str, tag: &str, policy: &RetryPolicy) -> Result<Self> {
        let key = std::env::var(EMBED_API_KEY_ENV)
            .map_err(|_| Error::Config(format!("{EMBED_API_KEY_ENV} is not set")))?;
        Self::new(endpoint, key, tag, policy)
    }
}

pub(crate) fn classify_http(err: reqwest::Error) -> Attempt {
    match err.status() {
        Some(s) if s.as_u16() == 429 || s.is_server_error() => Attempt::Retry(err.to_string()),
        Some(_) => Attempt::Fatal(Error::Provider(err.to_string())),
        None if err.is_decode() => {
            Attempt::Fatal(Error::Provider(format!("malformed response: {err}")))
        }
        None => Attempt::Retry(err.to_string()),
    }
}

impl EmbeddingService for HttpEmbeddingService {
    fn provider_tag(&self) -> &str {
        &self.tag
    }

    fn embed(&self, request: &EmbedRequest) -> Result<Vec<f64>, Attempt> {
        let resp: EmbedResponse = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(request)
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.json())
            .map_err(classify_http)?;
        if resp.vector.len() != resp.dim {
            return Err(Attempt::Fatal(Error::Provider(format!(
                "malformed response: dim field {} but {} values",
                resp.dim,
                resp.vector.len()
            ))));
        }
        Ok(resp.vector)
    }
}

type VectorFn = dyn Fn(&EmbedRequest) -> Vec<f64> + Send + Sync;

/// In-process service computing vectors with a closure and counting calls.
pub struct MockEmbeddingService {
    tag: String,
    f: Box<VectorFn>,
    calls: AtomicUsize,
}

impl MockEmbeddingService {
    pub fn new(
        tag: impl Into<String>,
        f: impl Fn(&EmbedRequest) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            tag: tag.into(),
            f: Box::new(f),
            calls: AtomicUsize::new(0),
        }
    }

    /// Always answers with `vector`.
    pub fn fixed(tag: impl Into<String>, vector: Vec<f64>) -> Self {
        Self::new(tag, move |_| vector.clone())
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl EmbeddingService for MockEmbeddingService {
    fn provider_tag(&self) -> &str {
        &self.tag
    }

    fn embed(&self, request: &EmbedRequest) -> Result<Vec<f64>, Attempt> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok((self.f)(request))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheRecord {
    provider_tag: String,
    hash: String,
    vector: Vec<f64>,
}

/// Normalized vectors keyed by (provider tag, SHA-256 of payload).
#[derive(Debug, Default)]
pub struct EmbeddingCache {
    entries: RwLock<HashMap<(String, String), Vec<f64>>>,
    dims: RwLock<HashMap<String, usize>>,
}

impl EmbeddingCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, provider_tag: &str, hash: &str) -> Option<Vec<f64>> {
        self.entries
            .read()
            .get(&(provider_tag.to_string(), hash.to_string()))
            .cloned()
    }

    /// Records a known dimension for a provider without adding vectors, so
    /// vectors already stored elsewhere (e.g. a database) constrain new ones.
    pub fn pin_dimension(&self, provider_tag: &str, dim: usize) -> Result<()> {
        let mut dims = self.dims.write();
        match dims.get(provider_tag) {
            Some(&d) if d != dim => Err(Error::DimensionMismatch {
                expected: d,
                actual: dim,
            }),
            _ => {
                dims.insert(provider_tag.to_string(), dim);
                Ok(())
            }
        }
    }

    pub fn insert(&self, provider_tag: &str, hash: &str, vector: Vec<f64>) -> Result<()> {
        self.pin_dimension(provider_tag, vector.len())?;
        self.entries
            .write()
            .insert((provider_tag.to_string(), hash.to_string()), vector);
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut records: Vec<CacheRecord> = self
            .entries
            .read()
            .iter()
            .map(|((tag, hash), v)| CacheRecord {
                provider_tag: tag.clone(),
                hash: hash.clone(),
                vector: v.clone(),
            })
            .collect();
        records.sort_by(|a, b| (&a.provider_tag, &a.hash).cmp(&(&b.provider_tag, &b.hash)));
        fs::write(path, serde_json::to_vec_pretty(&records)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cache = Self::new();
        if !path.exists() {
            return Ok(cache);
        }
        let records: Vec<CacheRecord> = serde_json::from_slice(&fs::read(path)?)?;
        for r in records {
            cache.insert(&r.provider_tag, &r.hash, r.vector)?;
        }
        Ok(cache)
    }
}

/// External embedding path: retry, normalize on receipt, cache by content.
pub struct ExternalEmbedder {
    service: Arc<dyn EmbeddingService>,
    cache: Arc<EmbeddingCache>,
    retry: RetryPolicy,
    concurrency: usize,
}

impl ExternalEmbedder {
    pub fn new(service: Arc<dyn EmbeddingService>, cache: Arc<EmbeddingCache>) -> Self {
        Self {
            service,
            cache,
            retry: RetryPolicy::default(),
            concurrency: 4,
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_concurrency(mut self, limit: usize) -> Self {
        self.concurrency = limit.max(1);
        self
    }

    pub fn cache(&self) -> &Arc<EmbeddingCache> {
        &self.cache
    }

    pub fn embed(&self, id: &str, payload: &[u8], kind: PayloadKind) -> Result<EmbeddingVector> {
        let tag = self.service.provider_tag().to_string();
        let hash = sha256_hex(payload);
        if let Some(values) = self.cache.get(&tag, &hash) {
            return Ok(EmbeddingVector {
                item_id: id.to_string(),
                values,
                provider_tag: tag,
            });
        }
        let request = EmbedRequest::new(id, payload, kind);
        let raw = self.retry.run(|| self.service.embed(&request))?;
        let values = l2_normalize(raw)
            .map_err(|e| Error::Provider(format!("malformed response: {e}")))?;
        self.cache.insert(&tag, &hash, values.clone())?;
        Ok(EmbeddingVector {
            item_id: id.to_string(),
            values,
            provider_tag: tag,
        })
    }

    /// Embeds many payloads with at most `concurrency` requests in flight.
    /// Output order matches input order.
    pub fn embed_many(&self, items: &[(String, Vec<u8>, PayloadKind)]) -> Result<Vec<EmbeddingVector>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.concurrency)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| {
            items
                .par_iter()
                .map(|(id, payload, kind)| self.embed(id, payload, *kind))
                .collect()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn embedder(service: Arc<MockEmbeddingService>) -> ExternalEmbedder {
        ExternalEmbedder::new(service, Arc::new(EmbeddingCache::new()))
            .with_retry(RetryPolicy::immediate(3))
    }

    #[test]
    fn normalizes_on_receipt() {
        let svc = Arc::new(MockEmbeddingService::fixed("mock/1", vec![3.0, 4.0]));
        let e = embedder(svc).embed("a", b"payload", PayloadKind::Series).unwrap();
        assert_eq!(e.values, vec![0.6, 0.8]);
        assert_eq!(e.provider_tag, "mock/1");
    }

    #[test]
    fn identical_payloads_hit_cache() {
        let svc = Arc::new(MockEmbeddingService::fixed("mock/1", vec![1.0, 1.0]));
        let emb = embedder(svc.clone());
        emb.embed("a", b"same", PayloadKind::Image).unwrap();
        let b = emb.embed("b", b"same", PayloadKind::Image).unwrap();
        assert_eq!(svc.calls(), 1);
        assert_eq!(b.item_id, "b");
    }

    #[test]
    fn dimension_mismatch_against_existing_entries() {
        let svc = Arc::new(MockEmbeddingService::new("mock/1", |req| {
            if req.id == "first" {
                vec![1.0; 768]
            } else {
                vec![1.0; 512]
            }
        }));
        let emb = embedder(svc);
        emb.embed("first", b"x", PayloadKind::Image).unwrap();
        let err = emb.embed("second", b"y", PayloadKind::Image).unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch {
                expected: 768,
                actual: 512
            }
        ));
    }

    #[test]
    fn zero_vector_is_malformed() {
        let svc = Arc::new(MockEmbeddingService::fixed("mock/1", vec![0.0, 0.0]));
        assert!(matches!(
            embedder(svc).embed("a", b"p", PayloadKind::Series),
            Err(Error::Provider(_))
        ));
    }

    #[test]
    fn cache_persists() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.json");
        let cache = EmbeddingCache::new();
        cache.insert("t", "h1", vec![1.0, 0.0]).unwrap();
        cache.save(&path).unwrap();
        let back = EmbeddingCache::load(&path).unwrap();
        assert_eq!(back.get("t", "h1"), Some(vec![1.0, 0.0]));
        assert!(back.insert("t", "h2", vec![1.0]).is_err());
    }

    #[test]
    fn embed_many_preserves_order_and_bounds_calls() {
        let svc = Arc::new(MockEmbeddingService::new("mock/1", |req| {
            vec![req.payload_b64.len() as f64, 1.0]
        }));
        let emb = embedder(svc.clone()).with_concurrency(4);
        let items: Vec<_> = (0..20)
            .map(|i| (format!("id{i}"), vec![0u8; i % 5 + 1], PayloadKind::Series))
            .collect();
        let out = emb.embed_many(&items).unwrap();
        assert_eq!(out.len(), 20);
        for (i, e) in out.iter().enumerate() {
            assert_eq!(e.item_id, format!("id{i}"));
        }
        // 5 distinct payloads; concurrent first-misses may duplicate a call
        assert!(svc.calls() >= 5 && svc.calls() <= 20);
    }

    #[test]
    fn wire_format() {
        let req = EmbedRequest::new("x", b"hi", PayloadKind::Image);
        let json = serde_json::to_value(&req).unwrap();
        assert_eq!(
            json,
            serde_json::json!({"id": "x", "payload_b64": "aGk=", "kind": "image"})
        );
    }
}
