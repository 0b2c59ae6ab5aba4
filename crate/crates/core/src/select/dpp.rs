use itertools::Itertools;
use nalgebra::DMatrix;

use super::{SelectionStrategy, SubsetSelection};
use crate::embeddings::SimilarityKernel;
use crate::error::{Error, Result};

/// Numerical floor on the residual variance d² of the next greedy pick.
pub const DEFAULT_EPSILON: f64 = 1e-10;
/// Default stopping gain for [`auto_k`]: ln(0.5).
pub const DEFAULT_GAIN_THRESHOLD: f64 = -std::f64::consts::LN_2;
/// Maximum number of subsets [`brute_force_map`] will enumerate.
pub const BRUTE_FORCE_BUDGET: u64 = 1_000_000;

const SINGULAR_LOG_DET: f64 = -700.0;

/// log det of a symmetric positive definite matrix via Cholesky.
/// `None` when the factorization fails (not numerically PD).
pub fn log_det(m: DMatrix<f64>) -> Option<f64> {
    if m.nrows() == 0 {
        return Some(0.0);
    }
    let chol = m.cholesky()?;
    let l = chol.l_dirty();
    Some((0..l.nrows()).map(|i| 2.0 * l[(i, i)].ln()).sum())
}

fn check_subset(n: usize, subset: &[usize]) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in subset {
        if i >= n {
            return Err(Error::invalid(format!("index {i} out of range for n = {n}")));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::invalid(format!("index {i} repeated in subset")));
        }
    }
    Ok(())
}

/// log P(S) = log det(L_S) − log det(L + I).
pub fn dpp_log_prob(kernel: &SimilarityKernel, subset: &[usize]) -> Result<f64> {
    let n = kernel.n();
    check_subset(n, subset)?;
    let normalizer = log_det(kernel.to_dmatrix() + DMatrix::identity(n, n))
        .ok_or_else(|| Error::invalid("L + I is not positive definite; kernel is not PSD"))?;
    let numerator = match log_det(kernel.principal_minor(subset)) {
        Some(v) if v > SINGULAR_LOG_DET => v,
        other => {
            return Err(Error::SingularMinor {
                subset: subset.to_vec(),
                log_det: other.unwrap_or(f64::NEG_INFINITY),
            })
        }
    };
    Ok(numerator - normalizer)
}

/// Greedy MAP selection of up to `k` items with incremental Cholesky updates,
/// O(n·k²). Each step picks the item with the largest residual variance d²
/// (lowest index on ties) and stops early once that variance is ≤ `epsilon`.
pub fn greedy_map_select(
    kernel: &SimilarityKernel,
    k: usize,
    epsilon: f64,
) -> Result<SubsetSelection> {
    let n = kernel.n();
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k > n {
        return Err(Error::KTooLarge { k, available: n });
    }
    if !(epsilon >= 0.0) {
        return Err(Error::invalid(format!("epsilon must be >= 0, got {epsilon}")));
    }

    let mut d2: Vec<f64> = (0..n).map(|i| kernel.get(i, i)).collect();
    // row i holds the partial Cholesky coefficients of item i
    let mut coeffs: Vec<Vec<f64>> = vec![Vec::with_capacity(k); n];
    let mut selected = vec![false; n];
    let mut indices = Vec::with_capacity(k);
    let mut gains = Vec::with_capacity(k);

    while indices.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|&i| !selected[i]) {
            if best.is_none_or(|(_, b)| d2[i] > b) {
                best = Some((i, d2[i]));
            }
        }
        let Some((j, dj2)) = best else { break };
        if dj2 <= epsilon {
            break;
        }
        selected[j] = true;
        indices.push(j);
        gains.push(dj2.ln());

        let dj = dj2.sqrt();
        let cj = std::mem::take(&mut coeffs[j]);
        let row = kernel.row(j);
        for i in (0..n).filter(|&i| !selected[i]) {
            let inner: f64 = cj.iter().zip(&coeffs[i]).map(|(a, b)| a * b).sum();
            let e = (row[i] - inner) / dj;
            coeffs[i].push(e);
            d2[i] -= e * e;
        }
        coeffs[j] = cj;
    }

    Ok(SubsetSelection {
        strategy: SelectionStrategy::Diverse,
        indices,
        gains,
        seed: None,
    })
}

/// Greedy selection truncated at the first step whose marginal gain falls
/// below `gain_threshold`, capped at `k_max` items.
pub fn auto_k(
    kernel: &SimilarityKernel,
    gain_threshold: f64,
    k_max: usize,
) -> Result<SubsetSelection> {
    if gain_threshold.is_nan() || gain_threshold == f64::NEG_INFINITY {
        return Err(Error::invalid("gain threshold must be a finite number"));
    }
    let mut sel = greedy_map_select(kernel, k_max, DEFAULT_EPSILON)?;
    if let Some(cut) = sel.gains.iter().position(|g| *g < gain_threshold) {
        sel.indices.truncate(cut);
        sel.gains.truncate(cut);
    }
    Ok(sel)
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Exhaustive argmax of det(L_S) over all size-k subsets. Determinants within
/// a relative 1e-12 of the running best count as ties, and ties keep the
/// lexicographically smallest index tuple.
pub fn brute_force_map(kernel: &SimilarityKernel, k: usize) -> Result<Vec<usize>> {
    let n = kernel.n();
    if k > n {
        return Err(Error::KTooLarge { k, available: n });
    }
    if binomial(n, k) > BRUTE_FORCE_BUDGET as u128 {
        return Err(Error::BudgetExceeded {
            n,
            k,
            budget: BRUTE_FORCE_BUDGET,
        });
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for subset in (0..n).combinations(k) {
        let det = kernel.principal_minor(&subset).determinant();
        let better = match &best {
            None => true,
            Some((_, b)) => det > b + 1e-12 * b.abs().max(f64::MIN_POSITIVE),
        };
        if better {
            best = Some((subset, det));
        }
    }
    Ok(best.map(|(s, _)| s).unwrap_or_default())
}
