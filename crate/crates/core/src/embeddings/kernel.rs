use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::EmbeddingVector;
use crate::error::{Error, Result};

/// Symmetric PSD similarity matrix over an ordered item list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityKernel {
    n: usize,
    /// Row-major n×n entries.
    entries: Vec<f64>,
    item_ids: Vec<String>,
}

impl SimilarityKernel {
    /// Wraps an explicit matrix. Checks shape and symmetry (1e-12) only; PSD
    /// is the caller's responsibility.
    pub fn from_matrix(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::invalid("empty kernel"));
        }
        let mut entries = Vec::with_capacity(n * n);
        for row in &rows {
            if row.len() != n {
                return Err(Error::invalid("kernel matrix is not square"));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("kernel contains non-finite entries"));
            }
            entries.extend_from_slice(row);
        }
        for i in 0..n {
            for j in 0..i {
                if (entries[i * n + j] - entries[j * n + i]).abs() > 1e-12 {
                    return Err(Error::invalid(format!("kernel not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self {
            n,
            entries,
            item_ids: (0..n).map(|i| i.to_string()).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.entries)
    }

    /// L restricted to rows and columns in `subset`, in the given order.
    pub fn principal_minor(&self, subset: &[usize]) -> DMatrix<f64> {
        let m = subset.len();
        DMatrix::from_fn(m, m, |a, b| self.get(subset[a], subset[b]))
    }

    /// Kernel with rows and columns reordered so new index `i` is old `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n);
        let n = self.n;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = self.get(perm[i], perm[j]);
            }
        }
        Self {
            n,
            entries,
            item_ids: perm.iter().map(|&p| self.item_ids[p].clone()).collect(),
        }
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn max_diagonal_deviation(&self) -> f64 {
        (0..self.n)
            .map(|i| (self.get(i, i) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.to_dmatrix())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Cosine Gram matrix of unit-norm embeddings.
///
/// Only the upper triangle is computed and mirrored, and the diagonal is set to
/// exactly 1.
pub fn build_kernel(embeddings: &[EmbeddingVector]) -> Result<SimilarityKernel> {
    let first = embeddings
        .first()
        .ok_or_else(|| Error::invalid("cannot build a kernel from zero embeddings"))?;
    let dim = first.dim();
    for e in embeddings {
        if e.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: e.dim(),
            });
        }
        if (e.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "embedding {} is not unit norm",
                e.item_id
            )));
        }
    }
    let n = embeddings.len();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        entries[i * n + i] = 1.0;
        for j in (i + 1)..n {
            let v = embeddings[i].dot(&embeddings[j]);
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    Ok(SimilarityKernel {
        n,
        entries,
        item_ids: embeddings.iter().map(|e| e.item_id.clone()).collect(),
    })
}
