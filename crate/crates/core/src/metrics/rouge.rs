use super::tokenize;
use crate::error::{Error, Result};

/// Length of the longest common subsequence of two token slices.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS F-measure, maximized over references.
pub fn rouge_l(candidate: &str, refs: &[String], beta: f64) -> Result<f64> {
    if refs.is_empty() {
        return Err(Error::invalid("ROUGE-L needs at least one reference"));
    }
    let cand = tokenize(candidate);
    if cand.is_empty() {
        return Ok(0.0);
    }
    let b2 = beta * beta;
    let best = refs
        .iter()
        .map(|r| {
            let rt = tokenize(r);
            let lcs = lcs_len(&cand, &rt) as f64;
            if lcs == 0.0 {
                return 0.0;
            }
            let recall = lcs / rt.len() as f64;
            let precision = lcs / cand.len() as f64;
            (1.0 + b2) * recall * precision / (recall + b2 * precision)
        })
        .fold(0.0, f64::max);
    Ok(best)
}
