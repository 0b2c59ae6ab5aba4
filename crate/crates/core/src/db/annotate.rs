use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{Annotation, Database};
use crate::embeddings::{build_kernel, EmbeddingVector};
use crate::error::{Error, Result};
use crate::select::{auto_k, greedy_map_select, random_select, SelectionStrategy, SubsetSelection, DEFAULT_EPSILON};

/// One item an annotator should caption in the target domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub id: String,
    pub image_path: Option<String>,
    pub domain: String,
    pub instruction: String,
}

/// One imported caption row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationImport {
    pub id: String,
    pub caption: String,
    #[serde(default)]
    pub annotator: Option<String>,
}

fn embeddings(db: &Database) -> Result<Vec<EmbeddingVector>> {
    let missing = db.unembedded_ids();
    if !missing.is_empty() {
        return Err(Error::Precondition(format!(
            "{} entries have no embedding (first: {}); run `db build` first",
            missing.len(),
            missing[0]
        )));
    }
    Ok(db
        .entries()
        .iter()
        .map(|e| e.embedding.clone().expect("checked above"))
        .collect())
}

/// Chooses exemplars to annotate and marks them in `db`.
///
/// `Diverse` runs greedy MAP on the embedding kernel, either for exactly `k`
/// items or, with `gain_threshold`, until the marginal gain drops below it
/// (at most `k`). `Random` draws `k` items with `seed`.
pub fn select_for_annotation(
    db: &mut Database,
    strategy: SelectionStrategy,
    k: usize,
    gain_threshold: Option<f64>,
    seed: u64,
) -> Result<SubsetSelection> {
    if db.is_empty() {
        return Err(Error::invalid("cannot select from an empty database"));
    }
    let selection = match strategy {
        SelectionStrategy::Diverse => {
            let kernel = build_kernel(&embeddings(db)?)?;
            match gain_threshold {
                Some(t) => auto_k(&kernel, t, k)?,
                None => greedy_map_select(&kernel, k, DEFAULT_EPSILON)?,
            }
        }
        SelectionStrategy::Random => SubsetSelection {
            strategy,
            indices: random_select(db.len(), k, seed)?,
            gains: Vec::new(),
            seed: Some(seed),
        },
        SelectionStrategy::NearestNeighbor => {
            return Err(Error::Config(
                "nearest-neighbor retrieval is per query and cannot pick annotation exemplars".into(),
            ))
        }
    };
    mark_exemplars(db, &selection.indices);
    Ok(selection)
}

/// Replaces the exemplar flags with `indices`, ranked in the given order.
pub fn mark_exemplars(db: &mut Database, indices: &[usize]) {
    for e in db.entries_mut() {
        e.is_diverse_exemplar = false;
        e.exemplar_rank = None;
    }
    for (rank, &i) in indices.iter().enumerate() {
        let e = &mut db.entries_mut()[i];
        e.is_diverse_exemplar = true;
        e.exemplar_rank = Some(rank);
    }
}

/// Tasks for exemplars that still lack an in-domain caption.
pub fn export_tasks(db: &Database, domain: &str) -> Vec<AnnotationTask> {
    db.exemplars()
        .into_iter()
        .filter(|e| !e.is_annotated())
        .map(|e| AnnotationTask {
            id: e.id().to_string(),
            image_path: e.sample.image_path.clone(),
            domain: domain.to_string(),
            instruction: format!(
                "Describe the time-series in this image as it would be described for: {domain}."
            ),
        })
        .collect()
}

/// Appends imported captions. All rows are validated before any is applied:
/// unknown ids fail together, and empty captions are rejected. Repeated rows
/// for one id are all kept.
pub fn import_annotations(
    db: &mut Database,
    rows: &[AnnotationImport],
    default_annotator: &str,
    ts: u64,
) -> Result<usize> {
    let mut unknown: Vec<String> = Vec::new();
    let mut seen = HashSet::new();
    for r in rows {
        if db.get(&r.id).is_none() && seen.insert(r.id.as_str()) {
            unknown.push(r.id.clone());
        }
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownIds(unknown));
    }
    if let Some(r) = rows.iter().find(|r| r.caption.trim().is_empty()) {
        return Err(Error::invalid(format!("empty caption for {}", r.id)));
    }
    for r in rows {
        let i = db.position(&r.id).expect("validated");
        db.entries_mut()[i].annotations.push(Annotation {
            caption: r.caption.trim().to_string(),
            annotator: r.annotator.clone().unwrap_or_else(|| default_annotator.to_string()),
            ts,
        });
    }
    Ok(rows.len())
}

/// Import rows that copy each entry's dataset captions; stands in for a
/// human annotator on synthetic data.
pub fn annotation_rows_from_references<'a>(
    db: &Database,
    ids: impl IntoIterator<Item = &'a str>,
) -> Vec<AnnotationImport> {
    ids.into_iter()
        .filter_map(|id| db.get(id))
        .flat_map(|e| {
            e.sample.in_domain.iter().map(|c| AnnotationImport {
                id: e.id().to_string(),
                caption: c.clone(),
                annotator: Some("reference".into()),
            })
        })
        .collect()
}
