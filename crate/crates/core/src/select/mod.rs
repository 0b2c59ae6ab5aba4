//! Diverse exemplar selection.
//!
//! The diverse strategy treats the similarity kernel as the L-ensemble of a
//! determinantal point process and approximates its size-k MAP subset with
//! the incremental-Cholesky greedy algorithm. Nearest-neighbor and random
//! selection are the retrieval baselines.

mod baseline;
mod dpp;

use serde::{Deserialize, Serialize};

pub use baseline::{nn_select, random_select};
pub use dpp::{
    auto_k, brute_force_map, dpp_log_prob, greedy_map_select, log_det, BRUTE_FORCE_BUDGET,
    DEFAULT_EPSILON, DEFAULT_GAIN_THRESHOLD,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionStrategy {
    Diverse,
    NearestNeighbor,
    Random,
}

/// Ordered selection with its greedy trace.
///
/// `gains[t]` is the marginal log-det gain (nats) of `indices[t]`; only the
/// diverse strategy records gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSelection {
    pub strategy: SelectionStrategy,
    pub indices: Vec<usize>,
    pub gains: Vec<f64>,
    pub seed: Option<u64>,
}

impl SubsetSelection {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}
