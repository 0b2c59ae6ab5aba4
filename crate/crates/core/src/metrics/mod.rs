//! Caption metrics: ROUGE-L, CIDEr-D, a content-word SPICE proxy and SPIDEr,
//! plus corpus aggregation and report tables.

mod cider;
mod report;
mod rouge;
mod spice;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use cider::{cider_d, compute_idf, ngrams, CorpusIdf};
pub use report::{render_csv, render_markdown, MetricReport, SampleScore};
pub use rouge::{lcs_len, rouge_l};
pub use spice::{content_words, spice_proxy, stem, STOPWORDS, STOPWORDS_VERSION};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedCaption {
    pub original: String,
    pub tokens: Vec<String>,
}

impl TokenizedCaption {
    pub fn new(text: &str) -> Self {
        Self {
            original: text.to_string(),
            tokens: tokenize(text),
        }
    }
}

/// Lowercase words; every non-alphanumeric character acts as a separator.
pub fn tokenize(text: &str) -> Vec<String> {
    text.chars()
        .map(|c| {
            if c.is_alphanumeric() {
                c.to_lowercase().next().unwrap_or(c)
            } else {
                ' '
            }
        })
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    /// ROUGE-L recall weight.
    pub beta: f64,
    pub n_max: usize,
    /// CIDEr-D length-penalty width.
    pub sigma: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            beta: 1.2,
            n_max: 4,
            sigma: 6.0,
        }
    }
}

/// Mean of SPICE and CIDEr after mapping CIDEr from [0, 10] to [0, 1].
pub fn spider(cider_score: f64, spice_score: f64) -> f64 {
    0.5 * (cider_score / 10.0 + spice_score)
}

/// A candidate caption with its references.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoringItem {
    pub id: String,
    pub candidate: String,
    pub references: Vec<String>,
}

/// Scores every item; the CIDEr idf is built from the references of all items.
pub fn score_items(items: &[ScoringItem], config: &MetricConfig) -> Result<Vec<SampleScore>> {
    if items.is_empty() {
        return Ok(Vec::new());
    }
    let corpus: Vec<Vec<String>> = items.iter().map(|i| i.references.clone()).collect();
    let idf = compute_idf(&corpus, config.n_max)?;
    items
        .iter()
        .map(|item| {
            let r = rouge_l(&item.candidate, &item.references, config.beta)?;
            let c = cider_d(&item.candidate, &item.references, &idf, config.n_max, config.sigma);
            let s = spice_proxy(&item.candidate, &item.references);
            Ok(SampleScore {
                id: item.id.clone(),
                candidate: item.candidate.clone(),
                rouge_l: r,
                cider_d: c,
                spice_proxy: s,
                spider: spider(c, s),
            })
        })
        .collect()
}

/// Groups references by id; ids come back sorted.
pub fn group_references(pairs: impl IntoIterator<Item = (String, String)>) -> BTreeMap<String, Vec<String>> {
    let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (id, cap) in pairs {
        map.entry(id).or_default().push(cap);
    }
    map
}
