//! Seeded fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tadacap_core::EmbeddingVector;

/// `n` random unit vectors of dimension `dim`.
pub fn random_embeddings(n: usize, dim: usize, seed: u64) -> Vec<EmbeddingVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            EmbeddingVector::normalized(format!("e{i}"), v, "bench").expect("nonzero vector")
        })
        .collect()
}

/// Caption-like strings drawn from a small vocabulary.
pub fn random_captions(n: usize, seed: u64) -> Vec<String> {
    const WORDS: [&str; 12] = [
        "the", "price", "grows", "falls", "stock", "is", "flat", "volatile", "with", "jumps",
        "steadily", "value",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.random_range(3..10);
            (0..len)
                .map(|_| WORDS[rng.random_range(0..WORDS.len())])
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}
