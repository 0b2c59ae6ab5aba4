use super::{Database, DbEntry};
use crate::embeddings::EmbeddingVector;
use crate::error::{Error, Result};
use crate::pipeline::Mode;
use crate::select::{nn_select, random_select, SelectionStrategy};

/// The database as seen by one query: every entry except the excluded one.
#[derive(Debug, Clone, Copy)]
pub struct DbView<'a> {
    db: &'a Database,
    excluded: Option<usize>,
}

impl<'a> DbView<'a> {
    pub fn full(db: &'a Database) -> Self {
        Self { db, excluded: None }
    }

    pub fn without(db: &'a Database, index: usize) -> Self {
        Self {
            db,
            excluded: Some(index),
        }
    }

    pub fn excluded(&self) -> Option<&'a DbEntry> {
        self.excluded.map(|i| &self.db.entries()[i])
    }

    pub fn entries(&self) -> impl Iterator<Item = &'a DbEntry> + '_ {
        let ex = self.excluded;
        self.db
            .entries()
            .iter()
            .enumerate()
            .filter(move |(i, _)| Some(*i) != ex)
            .map(|(_, e)| e)
    }

    pub fn len(&self) -> usize {
        self.db.len() - usize::from(self.excluded.is_some())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// In-context examples for `query`; every returned entry has at least one
/// in-domain caption and none shares the query's id.
///
/// `Diverse` returns the annotated exemplars in selection order and ignores
/// `k`. `NearestNeighbor` returns the `k` most cosine-similar annotated
/// entries, `Random` a seeded sample of `k` annotated entries.
pub fn retrieve<'a>(
    view: &DbView<'a>,
    query: &DbEntry,
    strategy: SelectionStrategy,
    k: usize,
    seed: u64,
) -> Result<Vec<&'a DbEntry>> {
    let pool: Vec<&'a DbEntry> = view
        .entries()
        .filter(|e| e.is_annotated() && e.id() != query.id())
        .collect();
    match strategy {
        SelectionStrategy::Diverse => {
            let mut ex: Vec<&'a DbEntry> = pool.into_iter().filter(|e| e.is_diverse_exemplar).collect();
            if ex.is_empty() {
                return Err(Error::Precondition(
                    "no annotated diverse exemplars; run `select` and `annotate import` first".into(),
                ));
            }
            ex.sort_by_key(|e| e.exemplar_rank.unwrap_or(usize::MAX));
            Ok(ex)
        }
        SelectionStrategy::NearestNeighbor => {
            let q = query.embedding.as_ref().ok_or_else(|| {
                Error::Precondition(format!("query {} has no embedding", query.id()))
            })?;
            let vecs: Vec<EmbeddingVector> = pool
                .iter()
                .map(|e| {
                    e.embedding.clone().ok_or_else(|| {
                        Error::Precondition(format!("entry {} has no embedding", e.id()))
                    })
                })
                .collect::<Result<_>>()?;
            Ok(nn_select(&vecs, q, k)?.into_iter().map(|i| pool[i]).collect())
        }
        SelectionStrategy::Random => Ok(random_select(pool.len(), k, seed)?
            .into_iter()
            .map(|i| pool[i])
            .collect()),
    }
}

/// Checks that `db` can serve `mode`, naming the missing step otherwise.
pub fn check_mode_precondition(db: &Database, mode: Mode) -> Result<()> {
    if db.is_empty() {
        return Err(Error::Precondition("database is empty".into()));
    }
    match mode {
        Mode::Diverse => {
            let ex = db.exemplars();
            if ex.is_empty() {
                return Err(Error::Precondition(
                    "diverse mode needs exemplars; run `select` then `annotate export`/`annotate import`".into(),
                ));
            }
            let missing: Vec<&str> = ex.iter().filter(|e| !e.is_annotated()).map(|e| e.id()).collect();
            if !missing.is_empty() {
                return Err(Error::Precondition(format!(
                    "{} diverse exemplars lack annotations ({}); run `annotate import`",
                    missing.len(),
                    missing.join(", ")
                )));
            }
        }
        Mode::Nn | Mode::Random => {
            let missing = db.entries().iter().filter(|e| !e.is_annotated()).count();
            if missing > 0 {
                return Err(Error::Precondition(format!(
                    "{mode} mode retrieves from the whole database and needs every entry annotated; \
                     {missing} of {} entries lack annotations (diverse mode needs only the selected exemplars)",
                    db.len()
                )));
            }
            if mode == Mode::Nn && !db.unembedded_ids().is_empty() {
                return Err(Error::Precondition("nn mode needs embeddings; run `db build`".into()));
            }
        }
        Mode::Zs | Mode::MultimodalDirect => {}
    }
    Ok(())
}

/// (query, view) pairs for leave-one-out evaluation. In diverse mode the
/// exemplars are skipped as queries, since they are the prompt examples.
pub fn leave_one_out_iter(db: &Database, mode: Mode) -> impl Iterator<Item = (&DbEntry, DbView<'_>)> {
    db.entries()
        .iter()
        .enumerate()
        .filter(move |(_, e)| !(mode == Mode::Diverse && e.is_diverse_exemplar))
        .map(move |(i, e)| (e, DbView::without(db, i)))
}
