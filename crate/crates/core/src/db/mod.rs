//! Target-domain database: entries with embeddings and annotations, the
//! diverse-annotation workflow, retrieval and leave-one-out iteration.

mod annotate;
mod retrieve;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use annotate::{
    annotation_rows_from_references, export_tasks, import_annotations, mark_exemplars,
    select_for_annotation, AnnotationImport, AnnotationTask,
};
pub use retrieve::{check_mode_precondition, leave_one_out_iter, retrieve, DbView};

use crate::embeddings::{
    builtin_featurize, EmbeddingVector, ExternalEmbedder, FeatureConfig, PayloadKind,
};
use crate::error::{Error, Result};
use crate::synthgen::{read_jsonl, write_jsonl, DatasetKind, TimeSeriesSample};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub caption: String,
    pub annotator: String,
    /// Unix seconds.
    pub ts: u64,
}

/// One database row. Serialized as the dataset line plus embedding,
/// exemplar and annotation fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "DbRecord", into = "DbRecord")]
pub struct DbEntry {
    pub sample: TimeSeriesSample,
    pub embedding: Option<EmbeddingVector>,
    /// Output of the agnostic captioner, with the captioner's tag.
    pub agnostic_caption: Option<(String, String)>,
    pub annotations: Vec<Annotation>,
    pub is_diverse_exemplar: bool,
    /// Position in the diverse selection order.
    pub exemplar_rank: Option<usize>,
}

impl DbEntry {
    pub fn new(sample: TimeSeriesSample) -> Self {
        Self {
            sample,
            embedding: None,
            agnostic_caption: None,
            annotations: Vec::new(),
            is_diverse_exemplar: false,
            exemplar_rank: None,
        }
    }

    pub fn id(&self) -> &str {
        &self.sample.id
    }

    pub fn series(&self) -> &[f64] {
        &self.sample.series
    }

    pub fn in_domain_captions(&self) -> impl Iterator<Item = &str> {
        self.annotations.iter().map(|a| a.caption.as_str())
    }

    pub fn is_annotated(&self) -> bool {
        !self.annotations.is_empty()
    }

    /// Ground-truth references for scoring: dataset captions when present,
    /// otherwise imported annotations.
    pub fn references(&self) -> Vec<String> {
        if self.sample.in_domain.is_empty() {
            self.in_domain_captions().map(str::to_string).collect()
        } else {
            self.sample.in_domain.clone()
        }
    }
}

#[derive(Serialize, Deserialize)]
struct DbRecord {
    #[serde(flatten)]
    sample: TimeSeriesSample,
    #[serde(default)]
    embedding: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embedding_provider: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    agnostic_caption: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    agnostic_captioner: Option<String>,
    #[serde(default)]
    is_diverse_exemplar: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exemplar_rank: Option<usize>,
    #[serde(default)]
    annotations: Vec<Annotation>,
}

impl From<DbRecord> for DbEntry {
    fn from(r: DbRecord) -> Self {
        let embedding = (!r.embedding.is_empty()).then(|| EmbeddingVector {
            item_id: r.sample.id.clone(),
            values: r.embedding,
            provider_tag: r.embedding_provider.unwrap_or_default(),
        });
        let agnostic_caption = r
            .agnostic_caption
            .map(|c| (r.agnostic_captioner.unwrap_or_default(), c));
        Self {
            sample: r.sample,
            embedding,
            agnostic_caption,
            annotations: r.annotations,
            is_diverse_exemplar: r.is_diverse_exemplar,
            exemplar_rank: r.exemplar_rank,
        }
    }
}

impl From<DbEntry> for DbRecord {
    fn from(e: DbEntry) -> Self {
        let (embedding, embedding_provider) = match e.embedding {
            Some(v) => (v.values, Some(v.provider_tag)),
            None => (Vec::new(), None),
        };
        let (agnostic_captioner, agnostic_caption) = match e.agnostic_caption {
            Some((tag, text)) => (Some(tag), Some(text)),
            None => (None, None),
        };
        Self {
            sample: e.sample,
            embedding,
            embedding_provider,
            agnostic_caption,
            agnostic_captioner,
            is_diverse_exemplar: e.is_diverse_exemplar,
            exemplar_rank: e.exemplar_rank,
            annotations: e.annotations,
        }
    }
}

/// Ordered collection of entries with unique ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Database {
    entries: Vec<DbEntry>,
    index: HashMap<String, usize>,
    /// Directory that relative image paths resolve against.
    base_dir: Option<PathBuf>,
}

impl Database {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: Vec<DbEntry>) -> Result<Self> {
        let mut db = Self::new();
        for e in entries {
            db.push(e)?;
        }
        Ok(db)
    }

    pub fn from_samples(samples: Vec<TimeSeriesSample>) -> Result<Self> {
        Self::from_entries(samples.into_iter().map(DbEntry::new).collect())
    }

    pub fn push(&mut self, entry: DbEntry) -> Result<()> {
        if self.index.contains_key(entry.id()) {
            return Err(Error::DuplicateId(entry.id().to_string()));
        }
        self.index.insert(entry.id().to_string(), self.entries.len());
        self.entries.push(entry);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[DbEntry] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [DbEntry] {
        &mut self.entries
    }

    pub fn get(&self, id: &str) -> Option<&DbEntry> {
        self.index.get(id).map(|&i| &self.entries[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn base_dir(&self) -> Option<&Path> {
        self.base_dir.as_deref()
    }

    pub fn set_base_dir(&mut self, dir: impl Into<PathBuf>) {
        self.base_dir = Some(dir.into());
    }

    pub fn kind(&self) -> Option<DatasetKind> {
        self.entries.first().map(|e| e.sample.kind)
    }

    /// Diverse exemplars in selection order.
    pub fn exemplars(&self) -> Vec<&DbEntry> {
        let mut ex: Vec<&DbEntry> = self.entries.iter().filter(|e| e.is_diverse_exemplar).collect();
        ex.sort_by_key(|e| e.exemplar_rank.unwrap_or(usize::MAX));
        ex
    }

    pub fn unembedded_ids(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter(|e| e.embedding.is_none())
            .map(|e| e.id().to_string())
            .collect()
    }

    /// Embeds every entry with the built-in featurizer.
    pub fn embed_builtin(&mut self, config: &FeatureConfig) -> Result<()> {
        use rayon::prelude::*;
        let vectors: Vec<EmbeddingVector> = self
            .entries
            .par_iter()
            .map(|e| builtin_featurize(e.id(), e.series(), config))
            .collect::<Result<_>>()?;
        for (e, v) in self.entries.iter_mut().zip(vectors) {
            e.embedding = Some(v);
        }
        Ok(())
    }

    /// Embeds every entry through an external service: rendered images when
    /// `kind` is `Image` (read from `image_path`), raw series bytes otherwise.
    pub fn embed_external(&mut self, embedder: &ExternalEmbedder, kind: PayloadKind) -> Result<()> {
        let mut items = Vec::with_capacity(self.len());
        for e in &self.entries {
            let payload = match kind {
                PayloadKind::Series => crate::util::series_bytes(e.series()),
                PayloadKind::Image => fs::read(self.image_file(e)?)?,
            };
            items.push((e.id().to_string(), payload, kind));
        }
        let vectors = embedder.embed_many(&items)?;
        for (e, v) in self.entries.iter_mut().zip(vectors) {
            e.embedding = Some(v);
        }
        Ok(())
    }

    pub fn image_file(&self, entry: &DbEntry) -> Result<PathBuf> {
        let rel = entry
            .sample
            .image_path
            .as_deref()
            .ok_or_else(|| Error::Precondition(format!("entry {} has no image", entry.id())))?;
        Ok(match &self.base_dir {
            Some(b) => b.join(rel),
            None => PathBuf::from(rel),
        })
    }

    /// Writes one JSON line per entry; an empty database writes an empty file.
    pub fn save(&self, path: &Path) -> Result<()> {
        write_jsonl(path, &self.entries)
    }

    /// Loads a database JSONL; image paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let entries: Vec<DbEntry> = read_jsonl(path)?;
        let mut db = Self::from_entries(entries)?;
        if let Some(dir) = path.parent() {
            db.set_base_dir(dir);
        }
        Ok(db)
    }

    /// Structural checks beyond what loading enforces.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let mut dims: HashMap<&str, usize> = HashMap::new();
        for e in &self.entries {
            if let Some(v) = &e.embedding {
                if let Some(&d) = dims.get(v.provider_tag.as_str()) {
                    if d != v.dim() {
                        problems.push(format!("{}: embedding dimension {} != {d}", e.id(), v.dim()));
                    }
                } else {
                    dims.insert(&v.provider_tag, v.dim());
                }
                if (v.norm() - 1.0).abs() > 1e-9 {
                    problems.push(format!("{}: embedding is not unit norm", e.id()));
                }
            }
            if e.series().iter().any(|x| !x.is_finite()) {
                problems.push(format!("{}: non-finite series value", e.id()));
            }
            if e.annotations.iter().any(|a| a.caption.trim().is_empty()) {
                problems.push(format!("{}: empty annotation", e.id()));
            }
        }
        if dims.len() > 1 {
            problems.push(format!(
                "embeddings from {} different providers",
                dims.len()
            ));
        }
        problems
    }
}
