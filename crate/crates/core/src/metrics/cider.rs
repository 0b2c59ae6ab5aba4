use std::collections::{BTreeMap, BTreeSet};

use super::tokenize;
use crate::error::{Error, Result};

/// Space-joined n-grams of a token list.
pub fn ngrams(tokens: &[String], n: usize) -> Vec<String> {
    if n == 0 || tokens.len() < n {
        return Vec::new();
    }
    tokens.windows(n).map(|w| w.join(" ")).collect()
}

fn counts(tokens: &[String], n: usize) -> BTreeMap<String, f64> {
    let mut c = BTreeMap::new();
    for g in ngrams(tokens, n) {
        *c.entry(g).or_insert(0.0) += 1.0;
    }
    c
}

/// Per-order document frequencies over reference sets ("images").
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusIdf {
    ref_count: usize,
    /// df[n-1][ngram] = number of images whose references contain the n-gram.
    df: Vec<BTreeMap<String, usize>>,
}

impl CorpusIdf {
    pub fn ref_count(&self) -> usize {
        self.ref_count
    }

    pub fn df(&self, n: usize, gram: &str) -> usize {
        self.df
            .get(n - 1)
            .and_then(|m| m.get(gram))
            .copied()
            .unwrap_or(0)
    }

    /// log(M / df); n-grams absent from every reference use df = 1.
    pub fn idf(&self, n: usize, gram: &str) -> f64 {
        let df = self.df(n, gram).max(1);
        (self.ref_count as f64 / df as f64).ln()
    }

    pub fn len(&self, n: usize) -> usize {
        self.df.get(n - 1).map_or(0, BTreeMap::len)
    }
}

/// Document frequencies over `corpus`, where each element is the reference
/// set of one image.
pub fn compute_idf(corpus: &[Vec<String>], n_max: usize) -> Result<CorpusIdf> {
    if corpus.is_empty() || corpus.iter().all(Vec::is_empty) {
        return Err(Error::invalid("cannot compute idf over an empty corpus"));
    }
    let mut df = vec![BTreeMap::new(); n_max];
    for refs in corpus {
        let toks: Vec<Vec<String>> = refs.iter().map(|r| tokenize(r)).collect();
        for n in 1..=n_max {
            let grams: BTreeSet<String> = toks.iter().flat_map(|t| ngrams(t, n)).collect();
            for g in grams {
                *df[n - 1].entry(g).or_insert(0) += 1;
            }
        }
    }
    Ok(CorpusIdf {
        ref_count: corpus.len(),
        df,
    })
}

fn tfidf(c: &BTreeMap<String, f64>, idf: &CorpusIdf, n: usize) -> (BTreeMap<String, f64>, f64) {
    let v: BTreeMap<String, f64> = c.iter().map(|(g, tf)| (g.clone(), tf * idf.idf(n, g))).collect();
    let norm = v.values().map(|x| x * x).sum::<f64>().sqrt();
    (v, norm)
}

/// CIDEr-D: clipped TF-IDF cosine per n-gram order with a Gaussian length
/// penalty, ×10, averaged over references and orders. Range [0, 10].
pub fn cider_d(candidate: &str, refs: &[String], idf: &CorpusIdf, n_max: usize, sigma: f64) -> f64 {
    let cand = tokenize(candidate);
    if cand.is_empty() || refs.is_empty() {
        return 0.0;
    }
    let ref_toks: Vec<Vec<String>> = refs.iter().map(|r| tokenize(r)).collect();
    let mut total = 0.0;
    for n in 1..=n_max {
        let (vc, nc) = tfidf(&counts(&cand, n), idf, n);
        let mut sum = 0.0;
        for rt in &ref_toks {
            let (vr, nr) = tfidf(&counts(rt, n), idf, n);
            if nc == 0.0 || nr == 0.0 {
                continue;
            }
            let clipped: f64 = vc
                .iter()
                .filter_map(|(g, wc)| vr.get(g).map(|wr| wc.min(*wr) * wr))
                .sum();
            let delta = cand.len() as f64 - rt.len() as f64;
            sum += clipped / (nc * nr) * (-(delta * delta) / (2.0 * sigma * sigma)).exp();
        }
        total += 10.0 * sum / refs.len() as f64;
    }
    total / n_max as f64
}
