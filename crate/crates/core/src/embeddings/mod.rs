//! Embedding vectors for time-series and the cosine similarity kernel.

mod external;
mod featurize;
mod kernel;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use external::{
    EmbedRequest, EmbeddingCache, EmbeddingService, ExternalEmbedder, HttpEmbeddingService,
    MockEmbeddingService, PayloadKind, EMBED_API_KEY_ENV,
};
pub use featurize::{builtin_featurize, raw_features, FeatureConfig, FeatureLayout, FEATURE_DIM};
pub(crate) use external::classify_http;
pub use kernel::{build_kernel, SimilarityKernel};

/// Tag recorded on vectors produced by the built-in featurizer.
pub const BUILTIN_PROVIDER_TAG: &str = "builtin-featurizer/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub item_id: String,
    pub values: Vec<f64>,
    pub provider_tag: String,
}

impl EmbeddingVector {
    /// Builds a unit-norm vector. Fails on non-finite entries or a zero vector.
    pub fn normalized(
        item_id: impl Into<String>,
        values: Vec<f64>,
        provider_tag: impl Into<String>,
    ) -> Result<Self> {
        let values = l2_normalize(values)?;
        Ok(Self {
            item_id: item_id.into(),
            values,
            provider_tag: provider_tag.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        dot(&self.values, &other.values)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity of two arbitrary non-zero vectors.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

pub(crate) fn l2_normalize(mut values: Vec<f64>) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::invalid("empty embedding"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("embedding contains non-finite values"));
    }
    let norm = dot(&values, &values).sqrt();
    if norm == 0.0 {
        return Err(Error::invalid("cannot normalize a zero vector"));
    }
    for v in &mut values {
        *v /= norm;
    }
    Ok(values)
}
