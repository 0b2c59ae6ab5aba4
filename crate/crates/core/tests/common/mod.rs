#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use tadacap_core::db::{annotation_rows_from_references, import_annotations, select_for_annotation};
use tadacap_core::embeddings::FeatureConfig;
use tadacap_core::pipeline::{CompletionService, Providers, RuleBasedCaptioner};
use tadacap_core::retry::RetryPolicy;
use tadacap_core::synthgen::{gen_dataset, GenOptions};
use tadacap_core::{Database, DatasetKind, EmbeddingVector, SelectionStrategy};

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(p, c);
            d = -d;
        }
        d *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    d
}

pub fn minor(m: &[Vec<f64>], subset: &[usize]) -> Vec<Vec<f64>> {
    subset
        .iter()
        .map(|&i| subset.iter().map(|&j| m[i][j]).collect())
        .collect()
}

pub fn gaussian_embeddings(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<EmbeddingVector> {
    (0..n)
        .map(|i| {
            let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            EmbeddingVector::normalized(format!("e{i}"), v, "test").unwrap()
        })
        .collect()
}

/// Kernel with `sizes[c]` items in cluster c, placed at shuffled indices.
/// Returns the matrix and each item's cluster.
pub fn cluster_kernel(rng: &mut ChaCha8Rng, sizes: &[usize], intra: f64, inter: f64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut labels: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &s)| std::iter::repeat_n(c, s))
        .collect();
    for i in (1..labels.len()).rev() {
        let j = rng.random_range(0..=i);
        labels.swap(i, j);
    }
    let n = labels.len();
    let m = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| match (i == j, labels[i] == labels[j]) {
                    (true, _) => 1.0,
                    (false, true) => intra,
                    (false, false) => inter,
                })
                .collect()
        })
        .collect();
    (m, labels)
}

/// 200 SynthStock samples, embedded, with 4 diverse exemplars annotated from
/// their reference captions.
pub fn protocol_db(seed: u64) -> Database {
    let samples = gen_dataset(DatasetKind::Stock, 200, seed, &GenOptions::default()).unwrap();
    let mut db = Database::from_samples(samples).unwrap();
    db.embed_builtin(&FeatureConfig::default()).unwrap();
    select_for_annotation(&mut db, SelectionStrategy::Diverse, 4, None, seed).unwrap();
    let ids: Vec<String> = db.exemplars().iter().map(|e| e.id().to_string()).collect();
    annotate(&mut db, &ids);
    db
}

pub fn annotate(db: &mut Database, ids: &[String]) {
    let rows = annotation_rows_from_references(db, ids.iter().map(String::as_str));
    import_annotations(db, &rows, "reference", 0).unwrap();
}

pub fn annotate_rest(db: &mut Database) {
    let ids: Vec<String> = db
        .entries()
        .iter()
        .filter(|e| !e.is_annotated())
        .map(|e| e.id().to_string())
        .collect();
    annotate(db, &ids);
}

pub fn providers(llm: Arc<dyn CompletionService>) -> Providers {
    Providers {
        captioner: Arc::new(RuleBasedCaptioner::default()),
        llm,
        multimodal: None,
        retry: RetryPolicy::immediate(1),
    }
}

/// Example pairs in a rendered in-context prompt; the last "Generic:" line is
/// the query.
pub fn example_pairs(prompt: &str) -> usize {
    prompt.lines().filter(|l| l.starts_with("Generic: ")).count().saturating_sub(1)
}
