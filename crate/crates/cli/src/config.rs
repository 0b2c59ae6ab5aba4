//! Run configuration: JSON file, then command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use tadacap_core::metrics::MetricConfig;
use tadacap_core::pipeline::{Endpoint, PipelineConfig};
use tadacap_core::retry::RetryPolicy;
use tadacap_core::synthgen::{NoiseMode, TrendMode};
use tadacap_core::{Error, Mode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub endpoint: Endpoint,
    #[serde(default)]
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub db: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub modes: Vec<Mode>,
    pub k: usize,
    /// Marginal gain cutoff for automatic k, in nats.
    pub gain_threshold: f64,
    pub seed: u64,
    pub concurrency: usize,
    pub domain: Option<String>,
    pub length: Option<usize>,
    pub noise_mode: NoiseMode,
    pub trend_mode: TrendMode,
    pub llm: Option<ProviderConfig>,
    pub multimodal: Option<ProviderConfig>,
    /// External agnostic captioner; the rule-based one when absent.
    pub captioner: Option<ProviderConfig>,
    /// External embedding service; the built-in featurizer when absent.
    pub embedding: Option<ProviderConfig>,
    pub max_tokens: u32,
    pub retry_attempts: u32,
    pub timeout_secs: u64,
    pub metrics: MetricConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            db: None,
            out: None,
            modes: vec![Mode::Diverse, Mode::Zs],
            k: p.k,
            gain_threshold: tadacap_core::select::DEFAULT_GAIN_THRESHOLD,
            seed: p.seed,
            concurrency: p.concurrency,
            domain: None,
            length: None,
            noise_mode: NoiseMode::default(),
            trend_mode: TrendMode::default(),
            llm: None,
            multimodal: None,
            captioner: None,
            embedding: None,
            max_tokens: p.max_tokens,
            retry_attempts: 3,
            timeout_secs: 60,
            metrics: p.metrics,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("config {}: {e}", path.display())).into())
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()).into());
        }
        if self.concurrency == 0 {
            return Err(Error::Config("concurrency must be at least 1".into()).into());
        }
        if self.retry_attempts == 0 {
            return Err(Error::Config("retry_attempts must be at least 1".into()).into());
        }
        Ok(())
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            k: self.k,
            seed: self.seed,
            domain: self.domain.clone(),
            concurrency: self.concurrency,
            max_tokens: self.max_tokens,
            metrics: self.metrics,
        }
    }

    pub fn retry(&self) -> RetryPolicy {
        RetryPolicy {
            max_attempts: self.retry_attempts,
            timeout: std::time::Duration::from_secs(self.timeout_secs),
            ..RetryPolicy::default()
        }
    }

    pub fn require_db(&self) -> anyhow::Result<&Path> {
        self.db
            .as_deref()
            .ok_or_else(|| Error::Config("no database path (--db)".into()).into())
    }

    pub fn require_out(&self) -> anyhow::Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::Config("no output path (--out)".into()).into())
    }
}
