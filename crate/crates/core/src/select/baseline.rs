use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embeddings::EmbeddingVector;
use crate::error::{Error, Result};

/// Top-k items by cosine similarity to `query`, descending, ties by lowest
/// index. Items sharing the query's id are never returned.
pub fn nn_select(
    embeddings: &[EmbeddingVector],
    query: &EmbeddingVector,
    k: usize,
) -> Result<Vec<usize>> {
    let mut scored = Vec::with_capacity(embeddings.len());
    for (i, e) in embeddings.iter().enumerate() {
        if e.item_id == query.item_id {
            continue;
        }
        if e.dim() != query.dim() {
            return Err(Error::DimensionMismatch {
                expected: query.dim(),
                actual: e.dim(),
            });
        }
        scored.push((i, e.dot(query)));
    }
    if k > scored.len() {
        return Err(Error::KTooLarge {
            k,
            available: scored.len(),
        });
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scored.into_iter().take(k).map(|(i, _)| i).collect())
}

/// k distinct indices from a seeded partial Fisher–Yates shuffle of 0..n.
pub fn random_select(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k > n {
        return Err(Error::KTooLarge { k, available: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(k);
    Ok(pool)
}
